use std::f64::consts::PI;

use super::joint::FiniteJointModel;
use crate::error::{Error, Result};
use crate::estimators::binning::equal_width_bin;
use crate::numeric::normal_cdf;

/// `E|X|` for `X ~ N(mu, sigma^2)`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.abs();
    }
    (2.0 / PI).sqrt() * sigma * (-mu * mu / (2.0 * sigma * sigma)).exp() + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasBin {
    /// Probability mass of the bin.
    pub p: f64,
    /// `conf - acc` in the bin.
    pub mu: f64,
    pub var_conf: f64,
    pub var_acc: f64,
    /// `(var_conf + var_acc) / (p * n)`.
    pub sigma2: f64,
}

/// Closed-form approximation of the expected plug-in ECE at sample size `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasApprox {
    pub n: f64,
    pub bins: Vec<BiasBin>,
    pub mu_n: f64,
}

impl BiasApprox {
    /// The population ECE the approximation converges to.
    pub fn limit(&self) -> f64 {
        self.bins.iter().map(|b| b.p * b.mu.abs()).sum()
    }
}

/// Models each bin's deviation `conf_i - acc_i` as Gaussian with the exact
/// population mean and the variance of a mean over `p_i n` draws, then sums
/// the folded-normal means weighted by bin mass. Empty bins are skipped.
pub fn ece_bias_mu(joint: &FiniteJointModel, n: f64, m: usize) -> Result<BiasApprox> {
    if m < 1 {
        return Err(Error::config("bin count must be at least 1"));
    }
    if !(n >= m as f64) || !n.is_finite() {
        return Err(Error::validation(format!("sample size {n} must be at least the bin count {m}")));
    }
    let mut w = vec![0.0; m];
    let mut s1 = vec![0.0; m];
    let mut hit = vec![0.0; m];
    for a in joint.atoms() {
        let (c, conf) = a.z.top_label();
        let b = equal_width_bin(conf, m);
        w[b] += a.pi;
        s1[b] += a.pi * conf;
        hit[b] += a.pi * a.q[c];
    }
    let mean: Vec<f64> = (0..m).map(|b| if w[b] > 0.0 { s1[b] / w[b] } else { 0.0 }).collect();
    let mut s2 = vec![0.0; m];
    for a in joint.atoms() {
        let conf = a.z.top_label().1;
        let b = equal_width_bin(conf, m);
        s2[b] += a.pi * (conf - mean[b]) * (conf - mean[b]);
    }
    let bins: Vec<BiasBin> = (0..m)
        .filter(|&b| w[b] > 0.0)
        .map(|b| {
            let acc = (hit[b] / w[b]).clamp(0.0, 1.0);
            let var_conf = s2[b] / w[b];
            let var_acc = acc * (1.0 - acc);
            BiasBin { p: w[b], mu: mean[b] - acc, var_conf, var_acc, sigma2: (var_conf + var_acc) / (w[b] * n) }
        })
        .collect();
    let mu_n = bins.iter().map(|b| b.p * folded_normal_mean(b.mu, b.sigma2.sqrt())).sum();
    Ok(BiasApprox { n, bins, mu_n })
}

/// `d mu_(n) / dn` by central differences on the closed form.
pub fn ece_bias_slope(joint: &FiniteJointModel, n: f64, m: usize) -> Result<f64> {
    let h = (n * 1e-4).max(1e-3);
    let lo = (n - h).max(m as f64);
    let hi = n + h;
    Ok((ece_bias_mu(joint, hi, m)?.mu_n - ece_bias_mu(joint, lo, m)?.mu_n) / (hi - lo))
}

/// `d^2 mu_(n) / dn^2` by central differences on the closed form.
pub fn ece_bias_curvature(joint: &FiniteJointModel, n: f64, m: usize) -> Result<f64> {
    let h = (n * 1e-3).max(1e-2);
    if n - h < m as f64 {
        return Err(Error::validation("sample size too close to the bin count"));
    }
    let f = |x: f64| ece_bias_mu(joint, x, m).map(|b| b.mu_n);
    Ok((f(n + h)? - 2.0 * f(n)? + f(n - h)?) / (h * h))
}
