use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binned::check_p;
use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Top-label confidences and correctness indicators.
fn top_pairs(data: &LabeledPredictions) -> Vec<(f64, f64)> {
    data.iter()
        .map(|(p, y)| {
            let (c, conf) = p.top_label();
            (conf, if c == y { 1.0 } else { 0.0 })
        })
        .collect()
}

/// Maximum absolute running mean of `conf - correct` over rows sorted by
/// confidence. The maximum is only taken at the end of each group of equal
/// confidences, so the value does not depend on row order.
pub fn ks(data: &LabeledPredictions) -> Result<f64> {
    let mut rows = top_pairs(data);
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = rows.len() as f64;
    let mut run = 0.0;
    let mut best: f64 = 0.0;
    for (i, &(c, h)) in rows.iter().enumerate() {
        run += (c - h) / n;
        if i + 1 == rows.len() || rows[i + 1].0 != c {
            best = best.max(run.abs());
        }
    }
    Ok(best)
}

/// Bandwidth of the kernel regression behind [`kde_tce`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// `1.06 * sd * N^(-1/5)`, or `0.01` when the confidences are constant.
    Auto,
}

impl Bandwidth {
    pub fn resolve(&self, conf: &[f64]) -> Result<f64> {
        match *self {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
            Bandwidth::Fixed(h) => Err(Error::config(format!("bandwidth must be positive, got {h}"))),
            Bandwidth::Auto => {
                let (_, sd) = crate::numeric::mean_sd(conf);
                let sd = sd.unwrap_or(0.0);
                if sd > 0.0 {
                    Ok(1.06 * sd * (conf.len() as f64).powf(-0.2))
                } else {
                    Ok(0.01)
                }
            }
        }
    }
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        let h: f64 = s.parse().map_err(|_| Error::config(format!("bad bandwidth '{s}'")))?;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::config(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Bandwidth::Fixed(h))
    }
}

/// Kernel estimate of the top-label `L^p` error. Correctness is regressed
/// on confidence with a Gaussian Nadaraya-Watson smoother and the deviations
/// are averaged over the sample. Needs at least 10 rows.
pub fn kde_tce(data: &LabeledPredictions, p: f64, bandwidth: Bandwidth) -> Result<f64> {
    check_p(p)?;
    if data.len() < 10 {
        return Err(Error::validation(format!("kernel estimate needs at least 10 rows, got {}", data.len())));
    }
    let rows = top_pairs(data);
    let conf: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let h = bandwidth.resolve(&conf)?;
    let terms: Vec<f64> = rows
        .par_iter()
        .map(|&(ci, _)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for &(cj, yj) in &rows {
                let u = (ci - cj) / h;
                let k = (-0.5 * u * u).exp();
                num += k * yj;
                den += k;
            }
            (ci - num / den).abs().powf(p)
        })
        .collect();
    Ok((pairwise_sum(&terms) / rows.len() as f64).powf(1.0 / p))
}

/// Maximum mean calibration error, V-statistic form with the Laplacian kernel
/// `exp(-|a - b| / nu)`.
///
/// After sorting by confidence the kernel factorizes along the sorted order,
/// so the double sum is evaluated with one forward and one backward pass.
pub fn mmce(data: &LabeledPredictions, nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::config(format!("kernel width must be positive, got {nu}")));
    }
    let mut rows = top_pairs(data);
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = rows.len();
    let c: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let r: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    for i in 0..n {
        fwd[i] = r[i] + if i > 0 { (-(c[i] - c[i - 1]) / nu).exp() * fwd[i - 1] } else { 0.0 };
    }
    for i in (0..n).rev() {
        bwd[i] = r[i] + if i + 1 < n { (-(c[i + 1] - c[i]) / nu).exp() * bwd[i + 1] } else { 0.0 };
    }
    let terms: Vec<f64> = (0..n).map(|i| r[i] * (fwd[i] + bwd[i] - r[i])).collect();
    let s = pairwise_sum(&terms) / (n as f64 * n as f64);
    Ok(s.max(0.0).sqrt())
}

/// Squared kernel calibration error, unbiased U-statistic with the matrix
/// kernel `exp(-||p - q||^2 / (2 nu^2)) * I`. Can be negative.
///
/// Row sums are computed in parallel, each in a fixed order, and combined by
/// pairwise summation, so the result does not depend on the thread count.
pub fn skce(data: &LabeledPredictions, nu: f64) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::config(format!("kernel width must be positive, got {nu}")));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::validation("SKCE needs at least 2 rows"));
    }
    let k = data.n_classes();
    let preds = data.predictions();
    let resid: Vec<Vec<f64>> = data
        .iter()
        .map(|(p, y)| p.iter().enumerate().map(|(c, &v)| v - if c == y { 1.0 } else { 0.0 }).collect())
        .collect();
    let inv = 1.0 / (2.0 * nu * nu);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in i + 1..n {
                let mut d2 = 0.0;
                let mut dot = 0.0;
                for c in 0..k {
                    let d = preds[i][c] - preds[j][c];
                    d2 += d * d;
                    dot += resid[i][c] * resid[j][c];
                }
                s += (-d2 * inv).exp() * dot;
            }
            s
        })
        .collect();
    Ok(2.0 * pairwise_sum(&rows) / (n as f64 * (n - 1) as f64))
}
