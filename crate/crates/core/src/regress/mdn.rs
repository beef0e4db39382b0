use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::friedman::RegressionDataset;
use super::platt::{apply_platt, fit_platt_variance};
use super::skce::{skce_regression, SkceKernel};
use super::{mean_dss, GaussianPrediction};
use crate::error::{Error, Result};
use crate::recal::{RecalMap, VARIANCE_FLOOR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdnConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Evaluate and record a curve point every this many iterations.
    pub eval_every: usize,
}

impl Default for MdnConfig {
    fn default() -> Self {
        MdnConfig { hidden: 50, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, iterations: 5000, seed: 0, eval_every: 100 }
    }
}

impl MdnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 {
            return Err(Error::config("hidden layer needs at least one unit"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam decay rates must lie in [0, 1)"));
        }
        if self.eval_every < 1 {
            return Err(Error::config("eval_every must be at least 1"));
        }
        Ok(())
    }
}

/// One hidden `tanh` layer with two linear outputs: the mean and the log
/// variance of a Gaussian.
///
/// Parameters are stored flat as `[W1 (h x d), b1 (h), W2 (2 x h), b2 (2)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mdn {
    d: usize,
    h: usize,
    params: Vec<f64>,
}

impl Mdn {
    /// Weights uniform in `+-1/sqrt(fan_in)`, biases zero.
    pub fn new(d: usize, h: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; h * d + h + 2 * h + 2];
        let a1 = 1.0 / (d as f64).sqrt();
        for w in &mut params[..h * d] {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = 1.0 / (h as f64).sqrt();
        let o = h * d + h;
        for w in &mut params[o..o + 2 * h] {
            *w = rng.random_range(-a2..a2);
        }
        Mdn { d, h, params }
    }

    /// Sets the output biases, e.g. to the target mean and log variance.
    pub fn with_output_bias(mut self, mean: f64, log_var: f64) -> Self {
        let n = self.params.len();
        self.params[n - 2] = mean;
        self.params[n - 1] = log_var;
        self
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let (h, d) = (self.h, self.d);
        (h * d, h * d + h, h * d + h + 2 * h)
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let (ob1, _, _) = self.offsets();
        (0..self.h)
            .map(|j| {
                let row = &self.params[j * self.d..(j + 1) * self.d];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[ob1 + j];
                z.tanh()
            })
            .collect()
    }

    /// Mean and log variance.
    pub fn forward(&self, x: &[f64]) -> (f64, f64) {
        let hid = self.hidden(x);
        let (_, ow2, ob2) = self.offsets();
        let h = self.h;
        let mu = hid.iter().zip(&self.params[ow2..ow2 + h]).map(|(a, w)| a * w).sum::<f64>() + self.params[ob2];
        let s = hid.iter().zip(&self.params[ow2 + h..ow2 + 2 * h]).map(|(a, w)| a * w).sum::<f64>() + self.params[ob2 + 1];
        (mu, s)
    }

    /// Prediction with the variance floored.
    pub fn predict(&self, x: &[f64]) -> GaussianPrediction {
        let (mu, s) = self.forward(x);
        GaussianPrediction::clamped(mu, s.exp()).0
    }

    pub fn predict_all(&self, data: &RegressionDataset) -> Vec<GaussianPrediction> {
        data.features().iter().map(|x| self.predict(x)).collect()
    }

    /// Mean DSS and its gradient with respect to the flat parameters.
    ///
    /// Where the variance sits on the floor the score no longer depends on
    /// the log-variance output, so that gradient is zero.
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let (ob1, ow2, ob2) = self.offsets();
        let (h, d) = (self.h, self.d);
        let mut g = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let hid = self.hidden(x);
            let (mu, s) = self.forward_from_hidden(&hid);
            let raw = s.exp();
            let (var, floored) = if raw < VARIANCE_FLOOR { (VARIANCE_FLOOR, true) } else { (raw, false) };
            let r = mu - y;
            loss += r * r / var + var.ln();
            let d_mu = 2.0 * r / var / n;
            let d_s = if floored { 0.0 } else { (1.0 - r * r / var) / n };
            g[ob2] += d_mu;
            g[ob2 + 1] += d_s;
            for j in 0..h {
                g[ow2 + j] += d_mu * hid[j];
                g[ow2 + h + j] += d_s * hid[j];
                let d_hid = d_mu * self.params[ow2 + j] + d_s * self.params[ow2 + h + j];
                let d_z = d_hid * (1.0 - hid[j] * hid[j]);
                g[ob1 + j] += d_z;
                for k in 0..d {
                    g[j * d + k] += d_z * x[k];
                }
            }
        }
        (loss / n, g)
    }

    fn forward_from_hidden(&self, hid: &[f64]) -> (f64, f64) {
        let (_, ow2, ob2) = self.offsets();
        let h = self.h;
        let mu = hid.iter().zip(&self.params[ow2..ow2 + h]).map(|(a, w)| a * w).sum::<f64>() + self.params[ob2];
        let s = hid.iter().zip(&self.params[ow2 + h..ow2 + 2 * h]).map(|(a, w)| a * w).sum::<f64>() + self.params[ob2 + 1];
        (mu, s)
    }

    pub fn loss(&self, data: &RegressionDataset) -> f64 {
        self.loss_and_grad(data.features(), data.targets()).0
    }
}

/// One row of a training curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub dss_train: f64,
    pub dss_val: f64,
    /// Validation DSS after the Platt variance map fitted on validation.
    pub dss_val_cal: f64,
    pub avg_var_raw: f64,
    pub avg_var_cal: f64,
    pub skce: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub model: Mdn,
    /// Snapshot with the lowest recalibrated validation DSS.
    pub best: Mdn,
    pub best_iter: usize,
    pub best_map: RecalMap,
    pub curve: Vec<CurvePoint>,
}

impl Mdn {
    /// Full-batch Adam on mean DSS. With a validation set, a curve point is
    /// recorded every `eval_every` iterations (and at iteration 0); the
    /// Platt variance map is refitted on validation at each point.
    pub fn train(
        train: &RegressionDataset,
        val: Option<&RegressionDataset>,
        cfg: &MdnConfig,
        kernel: SkceKernel,
    ) -> Result<TrainingRun> {
        cfg.validate()?;
        if train.len() < 2 {
            return Err(Error::validation("training needs at least 2 rows"));
        }
        let ys = train.targets();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR);
        let mut model = Mdn::new(train.dim(), cfg.hidden, cfg.seed).with_output_bias(mean, var.ln());
        let np = model.n_params();
        let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
        let mut curve = Vec::new();
        let mut best: Option<(f64, Mdn, usize, RecalMap)> = None;
        for it in 0..=cfg.iterations {
            let (loss, g) = model.loss_and_grad(train.features(), ys);
            if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("training diverged at iteration {it}")));
            }
            if let Some(val) = val {
                if it % cfg.eval_every == 0 || it == cfg.iterations {
                    let (pt, map) = evaluate_point(&model, it, loss, val, kernel)?;
                    if best.as_ref().is_none_or(|b| pt.dss_val_cal < b.0) {
                        best = Some((pt.dss_val_cal, model.clone(), it, map));
                    }
                    curve.push(pt);
                }
            }
            if it == cfg.iterations {
                break;
            }
            let t = (it + 1) as i32;
            let (c1, c2) = (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t));
            for k in 0..np {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                model.params[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + 1e-8);
            }
        }
        let (best, best_iter, best_map) = match best {
            Some((_, b, i, map)) => (b, i, map),
            None => (model.clone(), cfg.iterations, RecalMap::Identity),
        };
        Ok(TrainingRun { model, best, best_iter, best_map, curve })
    }
}

fn evaluate_point(
    model: &Mdn,
    iter: usize,
    train_loss: f64,
    val: &RegressionDataset,
    kernel: SkceKernel,
) -> Result<(CurvePoint, RecalMap)> {
    let preds = model.predict_all(val);
    let ys = val.targets();
    let map = fit_platt_variance(&preds, ys)?;
    let (cal, _) = apply_platt(&map, &preds)?;
    let avg = |p: &[GaussianPrediction]| p.iter().map(|g| g.var).sum::<f64>() / p.len() as f64;
    let pt = CurvePoint {
        iter,
        dss_train: train_loss,
        dss_val: mean_dss(&preds, ys)?,
        dss_val_cal: mean_dss(&cal, ys)?,
        avg_var_raw: avg(&preds),
        avg_var_cal: avg(&cal),
        skce: if ys.len() >= 2 { skce_regression(&cal, ys, kernel)? } else { f64::NAN },
    };
    Ok((pt, map))
}
