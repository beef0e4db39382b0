//! Proper scores, their entropies and divergences, the decomposition of the
//! expected score into entropy, sharpness and calibration, and the
//! calibration upper bound.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};
use crate::numeric::pairwise_mean;
use crate::simplex::ProbVector;
use crate::synth::FiniteJointModel;

/// A proper scoring rule `S(P, y)` (lower is better) with its generalized
/// entropy `g(Q) = E_{Y~Q} S(Q, Y)`.
pub trait ProperScore {
    type Prediction;
    type Outcome;

    fn name(&self) -> &'static str;

    fn score(&self, prediction: &Self::Prediction, outcome: &Self::Outcome) -> f64;

    fn entropy(&self, q: &Self::Prediction) -> f64;

    /// `inf_Q g(Q)`, or `None` when the entropy is unbounded below.
    fn entropy_infimum(&self) -> Option<f64>;

    fn strictly_proper(&self) -> bool {
        true
    }
}

/// Scores for categorical predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassScore {
    Brier,
    Log,
}

impl std::str::FromStr for ClassScore {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brier" => Ok(ClassScore::Brier),
            "log" | "nll" => Ok(ClassScore::Log),
            _ => Err(Error::config(format!("unknown score '{s}' (expected brier or log)"))),
        }
    }
}

impl ProperScore for ClassScore {
    type Prediction = ProbVector;
    type Outcome = usize;

    fn name(&self) -> &'static str {
        match self {
            ClassScore::Brier => "brier",
            ClassScore::Log => "log",
        }
    }

    fn score(&self, p: &ProbVector, y: &usize) -> f64 {
        match self {
            ClassScore::Brier => brier(p, *y),
            ClassScore::Log => log_score(p, *y),
        }
    }

    fn entropy(&self, q: &ProbVector) -> f64 {
        match self {
            ClassScore::Brier => 1.0 - q.iter().map(|v| v * v).sum::<f64>(),
            ClassScore::Log => -q.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>(),
        }
    }

    fn entropy_infimum(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `||p - e_y||^2`.
pub fn brier(p: &ProbVector, y: usize) -> f64 {
    p.iter()
        .enumerate()
        .map(|(k, &v)| {
            let d = v - if k == y { 1.0 } else { 0.0 };
            d * d
        })
        .sum()
}

/// `-ln p_y`; `+inf` when `p_y == 0`.
pub fn log_score(p: &ProbVector, y: usize) -> f64 {
    -p[y].ln()
}

/// Mean score over paired predictions and outcomes. `+inf` propagates.
pub fn mean_score<S: ProperScore>(s: &S, predictions: &[S::Prediction], outcomes: &[S::Outcome]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::validation("cannot score an empty dataset"));
    }
    if predictions.len() != outcomes.len() {
        return Err(Error::validation("predictions and outcomes differ in length"));
    }
    let v: Vec<f64> = predictions.iter().zip(outcomes).map(|(p, y)| s.score(p, y)).collect();
    Ok(pairwise_mean(&v))
}

/// Calibration upper bound `E[S] - inf g`. Fails for scores whose entropy is
/// unbounded below.
pub fn upper_bound_of<S: ProperScore>(s: &S, predictions: &[S::Prediction], outcomes: &[S::Outcome]) -> Result<f64> {
    let inf = s.entropy_infimum().ok_or_else(|| {
        Error::Unsupported(format!(
            "the {} entropy has no finite infimum; compare expected scores (expected_score) instead",
            s.name()
        ))
    })?;
    Ok(mean_score(s, predictions, outcomes)? - inf)
}

pub fn expected_score(data: &LabeledPredictions, s: ClassScore) -> Result<f64> {
    mean_score(&s, data.predictions(), data.labels())
}

pub fn upper_bound(data: &LabeledPredictions, s: ClassScore) -> Result<f64> {
    upper_bound_of(&s, data.predictions(), data.labels())
}

/// Square root of the mean Brier score.
pub fn rbs(data: &LabeledPredictions) -> Result<f64> {
    Ok(expected_score(data, ClassScore::Brier)?.sqrt())
}

/// `d(p, q) = sum_y q_y S(p, y) - g(q)`. Outcomes with `q_y = 0` contribute
/// nothing, even if their score is infinite.
pub fn divergence(s: ClassScore, p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::validation(format!("dimension mismatch: {} vs {}", p.len(), q.len())));
    }
    Ok(cross_score(s, p, q) - s.entropy(q))
}

fn cross_score(s: ClassScore, p: &ProbVector, q: &ProbVector) -> f64 {
    (0..q.len()).filter(|&y| q[y] > 0.0).map(|y| q[y] * s.score(p, &y)).sum()
}

/// The three terms of the expected-score decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `g(P_Y)`.
    pub entropy: f64,
    /// `E d(P_Y, P_{Y|f(X)})`.
    pub sharpness: f64,
    /// `E d(f(X), P_{Y|f(X)})`.
    pub calibration: f64,
    pub expected_score: f64,
}

impl Decomposition {
    /// `entropy - sharpness + calibration - expected_score`.
    pub fn residual(&self) -> f64 {
        self.entropy - self.sharpness + self.calibration - self.expected_score
    }
}

/// Exact decomposition on a finite joint. Atoms with equal predictions are
/// merged first so that the conditional is taken given the prediction.
pub fn decompose(joint: &FiniteJointModel, s: ClassScore) -> Result<Decomposition> {
    let joint = joint.merged();
    let marginal = joint.marginal();
    let entropy = s.entropy(&marginal);
    let mut sharpness = 0.0;
    let mut calibration = 0.0;
    let mut expected = 0.0;
    for a in joint.atoms() {
        sharpness += a.pi * divergence(s, &marginal, &a.q)?;
        calibration += a.pi * divergence(s, &a.z, &a.q)?;
        expected += a.pi * cross_score(s, &a.z, &a.q);
    }
    let d = Decomposition { entropy, sharpness, calibration, expected_score: expected };
    if ![d.entropy, d.sharpness, d.calibration, d.expected_score].iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "the {} score is infinite on this joint; the decomposition is undefined",
            s.name()
        )));
    }
    Ok(d)
}
