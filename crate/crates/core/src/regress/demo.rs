use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::friedman::{Friedman1, RegressionDataset};
use super::mdn::{CurvePoint, Mdn, MdnConfig};
use super::platt::apply_platt;
use super::skce::{skce_regression, SkceKernel};
use super::{diagnostics, mean_dss, Diagnostics, GaussianPrediction};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;
use crate::recal::RecalMap;

/// Settings for the variance-regression demo on Friedman-1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub data: Friedman1,
    pub mdn: MdnConfig,
    pub kernel: SkceKernel,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n_train: 100,
            n_val: 100,
            n_test: 100,
            data: Friedman1::new(100),
            mdn: MdnConfig::default(),
            kernel: SkceKernel::default(),
        }
    }
}

/// Raw and recalibrated summaries on one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoSplit {
    pub raw: Diagnostics,
    pub calibrated: Diagnostics,
    pub dss_raw: f64,
    pub dss_cal: f64,
    pub skce_raw: f64,
    pub skce_cal: f64,
    /// Rows whose recalibrated variance hit the floor.
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub seed: u64,
    pub best_iter: usize,
    pub map: RecalMap,
    pub train: DemoSplit,
    pub val: DemoSplit,
    pub test: DemoSplit,
    pub curve: Vec<CurvePoint>,
}

fn summarize(model: &Mdn, map: &RecalMap, data: &RegressionDataset, kernel: SkceKernel) -> Result<DemoSplit> {
    let raw = model.predict_all(data);
    let (cal, clamped) = apply_platt(map, &raw)?;
    let ys = data.targets();
    let skce = |p: &[GaussianPrediction]| if ys.len() >= 2 { skce_regression(p, ys, kernel) } else { Ok(f64::NAN) };
    Ok(DemoSplit {
        raw: diagnostics(&raw, ys)?,
        calibrated: diagnostics(&cal, ys)?,
        dss_raw: mean_dss(&raw, ys)?,
        dss_cal: mean_dss(&cal, ys)?,
        skce_raw: skce(&raw)?,
        skce_cal: skce(&cal)?,
        clamped,
    })
}

/// Trains the network on a fresh Friedman-1 split, keeps the iteration with
/// the best recalibrated validation DSS, and reports every split before and
/// after the Platt variance map fitted on validation.
pub fn variance_demo(seed: u64, cfg: &DemoConfig) -> Result<DemoReport> {
    if cfg.n_train < 2 || cfg.n_val < 2 || cfg.n_test < 1 {
        return Err(Error::config("demo needs at least 2 training, 2 validation and 1 test rows"));
    }
    let gen = |n: usize, tag: u64| Friedman1 { n, ..cfg.data }.generate(derive_seed(seed, &[tag]));
    let train = gen(cfg.n_train, 0)?;
    let val = gen(cfg.n_val, 1)?;
    let test = gen(cfg.n_test, 2)?;
    let mdn = MdnConfig { seed: derive_seed(seed, &[3]), ..cfg.mdn };
    let run = Mdn::train(&train, Some(&val), &mdn, cfg.kernel)?;
    Ok(DemoReport {
        seed,
        best_iter: run.best_iter,
        train: summarize(&run.best, &run.best_map, &train, cfg.kernel)?,
        val: summarize(&run.best, &run.best_map, &val, cfg.kernel)?,
        test: summarize(&run.best, &run.best_map, &test, cfg.kernel)?,
        map: run.best_map,
        curve: run.curve,
    })
}

/// Gaussian predictions whose true variance is `factor` times the stated
/// one: means `~ N(0, 1)`, stated variances uniform on `[0.5, 1.5]`,
/// targets `~ N(mean, factor * var)`.
pub fn overconfident_gaussians(n: usize, factor: f64, seed: u64) -> Result<(Vec<GaussianPrediction>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::validation("sample size must be at least 1"));
    }
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::validation("variance factor must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut preds = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let mean = std.sample(&mut rng);
        let var = rng.random_range(0.5..1.5);
        ys.push(mean + (factor * var).sqrt() * std.sample(&mut rng));
        preds.push(GaussianPrediction { mean, var });
    }
    Ok((preds, ys))
}
