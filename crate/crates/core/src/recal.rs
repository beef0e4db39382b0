//! Recalibration maps and improvement measurement.
//!
//! A [`RecalMap`] transforms predictions after training. Temperature
//! scaling and its ensemble variant are injective, which is what makes the
//! improvement of the calibration upper bound equal to the improvement of
//! the calibration error. The `tf_*` maps collapse predictions to a finite
//! set and are kept as counterexamples for binned estimators.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};
use crate::estimators::{evaluate, EstimatorConfig};
use crate::numeric::exact;
use crate::optim::{golden_section, project_simplex};
use crate::simplex::{self, ProbVector};

/// Floor applied to variances produced by the Platt variance map.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum RecalMap {
    Identity,
    /// `softmax(log p / t)`.
    Temperature {
        #[serde(with = "exact")]
        t: f64,
    },
    /// `w[0] * softmax(log p / t) + w[1] * p + w[2] * uniform`.
    Ets {
        #[serde(with = "exact::vec")]
        w: Vec<f64>,
        #[serde(with = "exact")]
        t: f64,
    },
    /// Replaces a prediction by `table[argmax]`.
    TfMulticlass { table: Vec<ProbVector> },
    /// Binary map on `P(Y = 1)`: `lo` below 0.5, `hi` otherwise.
    TfBinary {
        #[serde(with = "exact")]
        lo: f64,
        #[serde(with = "exact")]
        hi: f64,
    },
    /// Affine map on a predicted variance, clamped at [`VARIANCE_FLOOR`].
    PlattVariance {
        #[serde(with = "exact")]
        w: f64,
        #[serde(with = "exact")]
        b: f64,
    },
}

impl RecalMap {
    pub fn temperature(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::validation(format!("temperature must be positive, got {t}")));
        }
        Ok(RecalMap::Temperature { t })
    }

    pub fn ets(w: [f64; 3], t: f64) -> Result<Self> {
        let m = RecalMap::Ets { w: w.to_vec(), t };
        m.validate()?;
        Ok(m)
    }

    /// Checks parameter invariants; called after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            RecalMap::Identity => Ok(()),
            RecalMap::Temperature { t } => RecalMap::temperature(*t).map(|_| ()),
            RecalMap::Ets { w, t } => {
                RecalMap::temperature(*t)?;
                if w.len() != 3 || w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!("ensemble weights {w:?} are not on the simplex")));
                }
                Ok(())
            }
            RecalMap::TfMulticlass { table } => {
                let n = table.len();
                if n < 2 || table.iter().any(|p| p.len() != n) {
                    return Err(Error::validation("table needs one row of length n per class"));
                }
                Ok(())
            }
            RecalMap::TfBinary { lo, hi } => {
                if !(0.0..=1.0).contains(lo) || !(0.0..=1.0).contains(hi) {
                    return Err(Error::validation("binary levels must lie in [0, 1]"));
                }
                Ok(())
            }
            RecalMap::PlattVariance { w, b } => {
                if !w.is_finite() || !b.is_finite() {
                    return Err(Error::validation("Platt parameters must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RecalMap::Identity => "identity",
            RecalMap::Temperature { .. } => "temperature",
            RecalMap::Ets { .. } => "ets",
            RecalMap::TfMulticlass { .. } => "tf_multiclass",
            RecalMap::TfBinary { .. } => "tf_binary",
            RecalMap::PlattVariance { .. } => "platt_variance",
        }
    }

    pub fn is_injective(&self) -> bool {
        match self {
            RecalMap::Identity | RecalMap::Temperature { .. } => true,
            RecalMap::Ets { w, .. } => w[0] > 0.0,
            RecalMap::TfMulticlass { .. } | RecalMap::TfBinary { .. } => false,
            RecalMap::PlattVariance { w, .. } => *w != 0.0,
        }
    }

    /// Transforms one prediction.
    pub fn apply_one(&self, p: &ProbVector) -> Result<ProbVector> {
        match self {
            RecalMap::Identity => Ok(p.clone()),
            RecalMap::Temperature { t } => Ok(simplex::temper(p, *t)),
            RecalMap::Ets { w, t } => {
                let ts = simplex::temper(p, *t);
                let u = 1.0 / p.len() as f64;
                let v = ts.iter().zip(p.iter()).map(|(a, b)| w[0] * a + w[1] * b + w[2] * u).collect();
                ProbVector::renormalized(v, 1e-9)
            }
            RecalMap::TfMulticlass { table } => {
                if table.len() != p.len() {
                    return Err(Error::validation(format!("map built for {} classes, got {}", table.len(), p.len())));
                }
                Ok(table[p.top_label().0].clone())
            }
            RecalMap::TfBinary { lo, hi } => {
                if p.len() != 2 {
                    return Err(Error::validation("binary map applied to a non-binary prediction"));
                }
                let v = if p[1] < 0.5 { *lo } else { *hi };
                ProbVector::new(vec![1.0 - v, v])
            }
            RecalMap::PlattVariance { .. } => {
                Err(Error::Unsupported("the Platt variance map acts on Gaussian predictions; use apply_variance".into()))
            }
        }
    }

    /// Transforms every prediction; labels are unchanged.
    pub fn apply(&self, data: &LabeledPredictions) -> Result<LabeledPredictions> {
        if matches!(self, RecalMap::Identity) {
            return Ok(data.clone());
        }
        let preds = data.predictions().iter().map(|p| self.apply_one(p)).collect::<Result<Vec<_>>>()?;
        data.with_predictions(preds)
    }

    /// Platt map on a variance. Returns the new variance and whether the
    /// floor was active.
    pub fn apply_variance(&self, var: f64) -> Result<(f64, bool)> {
        match self {
            RecalMap::Identity => Ok((var.max(VARIANCE_FLOOR), var < VARIANCE_FLOOR)),
            RecalMap::PlattVariance { w, b } => {
                let v = w * var + b;
                Ok((v.max(VARIANCE_FLOOR), v < VARIANCE_FLOOR))
            }
            other => Err(Error::Unsupported(format!("{} maps act on categorical predictions", other.kind()))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: RecalMap = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

fn check_fit_data(val: &LabeledPredictions) -> Result<()> {
    if val.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 validation rows, got {}", val.len())));
    }
    let first = val.labels()[0];
    if val.labels().iter().all(|&y| y == first) {
        return Err(Error::Fit("validation labels are all one class".into()));
    }
    Ok(())
}

// Smallest log-probability used while fitting, so that zero entries do not
// make the objective infinite everywhere.
const LOG_FLOOR: f64 = -690.0;

fn log_rows(val: &LabeledPredictions) -> Vec<Vec<f64>> {
    val.predictions().iter().map(|p| p.iter().map(|v| v.ln().max(LOG_FLOOR)).collect()).collect()
}

/// Mean negative log-likelihood of `softmax(log p / t)`.
pub fn tempered_nll(val: &LabeledPredictions, t: f64) -> f64 {
    nll_from_logs(&log_rows(val), val.labels(), t)
}

fn nll_from_logs(logs: &[Vec<f64>], labels: &[usize], t: f64) -> f64 {
    let terms: Vec<f64> = logs
        .iter()
        .zip(labels)
        .map(|(l, &y)| {
            let m = l.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) / t;
            let lse = m + l.iter().map(|v| (v / t - m).exp()).sum::<f64>().ln();
            lse - l[y] / t
        })
        .collect();
    crate::numeric::pairwise_mean(&terms)
}

/// Temperature minimizing validation NLL, by golden-section search on
/// `log t` over `[-5, 5]` to a bracket width of `1e-6`.
pub fn fit_temperature(val: &LabeledPredictions) -> Result<RecalMap> {
    check_fit_data(val)?;
    let logs = log_rows(val);
    let (x, fx) = golden_section(|x| nll_from_logs(&logs, val.labels(), x.exp()), -5.0, 5.0, 1e-6);
    if !fx.is_finite() {
        return Err(Error::Fit("validation NLL is not finite".into()));
    }
    RecalMap::temperature(x.exp())
}

pub const ETS_STEP: f64 = 0.1;
pub const ETS_ITERATIONS: usize = 500;

/// Ensemble temperature scaling. The temperature is fitted first, then the
/// three mixture weights by projected gradient descent on validation NLL
/// from `(1, 0, 0)`. The best iterate is returned, so the fit is never
/// worse than plain temperature scaling.
pub fn fit_ets(val: &LabeledPredictions) -> Result<RecalMap> {
    let t = match fit_temperature(val)? {
        RecalMap::Temperature { t } => t,
        _ => unreachable!(),
    };
    let ts = RecalMap::Temperature { t };
    let n = val.n_classes() as f64;
    // Per row: probability of the true label under each component.
    let comps: Vec<[f64; 3]> = val
        .iter()
        .map(|(p, y)| [ts.apply_one(p).map(|q| q[y]).unwrap_or(0.0), p[y], 1.0 / n])
        .collect();
    let loss = |w: &[f64]| {
        let v: Vec<f64> = comps.iter().map(|c| -(w[0] * c[0] + w[1] * c[1] + w[2] * c[2]).max(1e-300).ln()).collect();
        crate::numeric::pairwise_mean(&v)
    };
    let mut w = vec![1.0, 0.0, 0.0];
    let mut best = (loss(&w), w.clone());
    for _ in 0..ETS_ITERATIONS {
        let mut g = [0.0; 3];
        for c in &comps {
            let m = (w[0] * c[0] + w[1] * c[1] + w[2] * c[2]).max(1e-300);
            for k in 0..3 {
                g[k] -= c[k] / m;
            }
        }
        let step: Vec<f64> = (0..3).map(|k| w[k] - ETS_STEP * g[k] / comps.len() as f64).collect();
        w = project_simplex(&step);
        let l = loss(&w);
        if l < best.0 {
            best = (l, w.clone());
        }
    }
    RecalMap::ets([best.1[0], best.1[1], best.1[2]], t)
}

/// Table of empirical label distributions given the predicted top label,
/// fitted on `val`. Every class must occur as a top label.
pub fn fit_tf(val: &LabeledPredictions) -> Result<RecalMap> {
    let n = val.n_classes();
    let mut counts = vec![vec![0usize; n]; n];
    for (p, y) in val.iter() {
        counts[p.top_label().0][y] += 1;
    }
    let absent: Vec<usize> = (0..n).filter(|&a| counts[a].iter().sum::<usize>() == 0).collect();
    if !absent.is_empty() {
        return Err(Error::Fit(format!("classes never predicted as top label: {absent:?}")));
    }
    let table = counts
        .iter()
        .map(|row| {
            let s = row.iter().sum::<usize>() as f64;
            ProbVector::renormalized(row.iter().map(|&c| c as f64 / s).collect(), 1e-9)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecalMap::TfMulticlass { table })
}

/// Map that puts `accuracy` on the predicted top label and spreads the rest
/// evenly over the other classes.
pub fn tf_accuracy(n_classes: usize, accuracy: f64) -> Result<RecalMap> {
    if n_classes < 2 {
        return Err(Error::validation("need at least 2 classes"));
    }
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::validation(format!("accuracy {accuracy} outside [0, 1]")));
    }
    let rest = (1.0 - accuracy) / (n_classes - 1) as f64;
    let table = (0..n_classes)
        .map(|a| ProbVector::renormalized((0..n_classes).map(|k| if k == a { accuracy } else { rest }).collect(), 1e-9))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecalMap::TfMulticlass { table })
}

/// [`tf_accuracy`] with the top-label accuracy measured on `val`.
pub fn fit_tf_accuracy(val: &LabeledPredictions) -> Result<RecalMap> {
    tf_accuracy(val.n_classes(), val.accuracy())
}

/// Binary map with `lo = P(Y=1 | p_1 < 0.5)` and `hi = P(Y=1 | p_1 >= 0.5)`
/// estimated on `val`.
pub fn fit_tf_binary(val: &LabeledPredictions) -> Result<RecalMap> {
    if val.n_classes() != 2 {
        return Err(Error::Fit("binary map needs 2-class data".into()));
    }
    let (mut n_lo, mut y_lo, mut n_hi, mut y_hi) = (0usize, 0usize, 0usize, 0usize);
    for (p, y) in val.iter() {
        if p[1] < 0.5 {
            n_lo += 1;
            y_lo += y;
        } else {
            n_hi += 1;
            y_hi += y;
        }
    }
    if n_lo == 0 || n_hi == 0 {
        return Err(Error::Fit("both sides of the 0.5 threshold need validation rows".into()));
    }
    Ok(RecalMap::TfBinary { lo: y_lo as f64 / n_lo as f64, hi: y_hi as f64 / n_hi as f64 })
}

/// Recalibration method selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecalMethod {
    Identity,
    Ts,
    Ets,
    Tf,
    TfAccuracy,
    TfBinary,
}

impl RecalMethod {
    pub fn fit(&self, val: &LabeledPredictions) -> Result<RecalMap> {
        match self {
            RecalMethod::Identity => Ok(RecalMap::Identity),
            RecalMethod::Ts => fit_temperature(val),
            RecalMethod::Ets => fit_ets(val),
            RecalMethod::Tf => fit_tf(val),
            RecalMethod::TfAccuracy => fit_tf_accuracy(val),
            RecalMethod::TfBinary => fit_tf_binary(val),
        }
    }
}

impl std::str::FromStr for RecalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(RecalMethod::Identity),
            "ts" => Ok(RecalMethod::Ts),
            "ets" => Ok(RecalMethod::Ets),
            "tf" => Ok(RecalMethod::Tf),
            "tf_accuracy" => Ok(RecalMethod::TfAccuracy),
            "tf_binary" => Ok(RecalMethod::TfBinary),
            _ => Err(Error::config(format!(
                "unknown method '{s}' (expected identity, ts, ets, tf, tf_accuracy or tf_binary)"
            ))),
        }
    }
}

/// Estimator values before and after a map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub before: f64,
    pub after: f64,
}

impl Improvement {
    /// `e(before) - e(after)`.
    pub fn plain(&self) -> f64 {
        self.before - self.after
    }

    /// `e(before)^2 - e(after)^2`.
    pub fn squared(&self) -> f64 {
        self.before * self.before - self.after * self.after
    }
}

pub fn improvement(data: &LabeledPredictions, map: &RecalMap, config: &EstimatorConfig) -> Result<Improvement> {
    let before = evaluate(data, config)?;
    let after = evaluate(&map.apply(data)?, config)?;
    Ok(Improvement { before, after })
}
