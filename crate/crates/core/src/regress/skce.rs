use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GaussianPrediction;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Widths of the Gaussian kernels on predictions, seen as points
/// `(mean, var)` in the plane, and on targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkceKernel {
    pub nu_p: f64,
    pub nu_y: f64,
}

impl Default for SkceKernel {
    fn default() -> Self {
        SkceKernel { nu_p: 1.0, nu_y: 1.0 }
    }
}

impl SkceKernel {
    fn check(&self) -> Result<()> {
        if !(self.nu_p > 0.0 && self.nu_p.is_finite() && self.nu_y > 0.0 && self.nu_y.is_finite()) {
            return Err(Error::config("kernel widths must be positive and finite"));
        }
        Ok(())
    }

    fn kp(&self, a: &GaussianPrediction, b: &GaussianPrediction) -> f64 {
        let d2 = (a.mean - b.mean).powi(2) + (a.var - b.var).powi(2);
        (-d2 / (2.0 * self.nu_p * self.nu_p)).exp()
    }

    fn ky(&self, a: f64, b: f64) -> f64 {
        (-(a - b).powi(2) / (2.0 * self.nu_y * self.nu_y)).exp()
    }

    /// `E k_y(y, Z)` for `Z ~ N(mean, var)`.
    pub(crate) fn expected_ky(&self, y: f64, p: &GaussianPrediction) -> f64 {
        let s = self.nu_y * self.nu_y + p.var;
        self.nu_y / s.sqrt() * (-(y - p.mean).powi(2) / (2.0 * s)).exp()
    }

    /// `E k_y(Z, Z')` for independent `Z ~ p`, `Z' ~ q`.
    fn expected_kyy(&self, p: &GaussianPrediction, q: &GaussianPrediction) -> f64 {
        let s = self.nu_y * self.nu_y + p.var + q.var;
        self.nu_y / s.sqrt() * (-(p.mean - q.mean).powi(2) / (2.0 * s)).exp()
    }

    /// Pair term; bitwise symmetric in its two rows.
    fn h(&self, pi: &GaussianPrediction, yi: f64, pj: &GaussianPrediction, yj: f64) -> f64 {
        let a = self.expected_ky(yi, pj) + self.expected_ky(yj, pi);
        self.kp(pi, pj) * (self.ky(yi, yj) + self.expected_kyy(pi, pj) - a)
    }
}

fn check(preds: &[GaussianPrediction], targets: &[f64], kernel: SkceKernel) -> Result<()> {
    kernel.check()?;
    if preds.len() != targets.len() {
        return Err(Error::validation("need equally many predictions and targets"));
    }
    if preds.len() < 2 {
        return Err(Error::validation("SKCE needs at least 2 rows"));
    }
    Ok(())
}

/// Squared kernel calibration error of Gaussian predictions, as an
/// unbiased U-statistic. Can be negative.
///
/// Rows are put in a canonical order first, so any permutation of the input
/// gives the same value bit for bit.
pub fn skce_regression(preds: &[GaussianPrediction], targets: &[f64], kernel: SkceKernel) -> Result<f64> {
    check(preds, targets, kernel)?;
    let mut rows: Vec<(GaussianPrediction, f64)> = preds.iter().copied().zip(targets.iter().copied()).collect();
    rows.sort_by(|a, b| {
        a.0.mean.total_cmp(&b.0.mean).then(a.0.var.total_cmp(&b.0.var)).then(a.1.total_cmp(&b.1))
    });
    let n = rows.len();
    let sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (pi, yi) = &rows[i];
            let mut s = 0.0;
            for (pj, yj) in &rows[i + 1..] {
                s += kernel.h(pi, *yi, pj, *yj);
            }
            s
        })
        .collect();
    Ok(2.0 * pairwise_sum(&sums) / (n as f64 * (n - 1) as f64))
}

/// Reference implementation: plain average of the pair term over all
/// ordered pairs `i != j`, in input order, single-threaded.
pub fn skce_regression_pairs(preds: &[GaussianPrediction], targets: &[f64], kernel: SkceKernel) -> Result<f64> {
    check(preds, targets, kernel)?;
    let n = preds.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += kernel.h(&preds[i], targets[i], &preds[j], targets[j]);
            }
        }
    }
    Ok(s / (n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::overconfident_gaussians;

    /// Nodes and weights for `int f(x) exp(-x^2) dx`, by Newton iteration on
    /// the orthonormal Hermite recurrence.
    fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut out = vec![(0.0, 0.0); n];
        let m = n.div_ceil(2);
        let mut z: f64 = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * out[0].0,
                3 => 1.91 * z - 0.91 * out[1].0,
                _ => 2.0 * z - out[i - 2].0,
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2 - (j as f64 / (j + 1) as f64).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            out[i] = (z, 2.0 / (pp * pp));
            out[n - 1 - i] = (-z, 2.0 / (pp * pp));
        }
        out
    }

    #[test]
    fn quadrature_rule_is_exact_on_moments() {
        let gh = gauss_hermite(64);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m0: f64 = gh.iter().map(|(_, w)| w).sum();
        let m2: f64 = gh.iter().map(|(x, w)| w * x * x).sum();
        assert!((m0 - sqrt_pi).abs() < 1e-13);
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-13);
    }

    #[test]
    fn expected_kernel_matches_quadrature() {
        let gh = gauss_hermite(64);
        let k = SkceKernel { nu_p: 1.0, nu_y: 0.7 };
        for &(y, m, v) in &[(0.0, 0.0, 1.0), (1.3, -0.4, 0.25), (-2.0, 0.5, 2.0), (0.1, 0.1, 1e-4)] {
            let p = GaussianPrediction::new(m, v).unwrap();
            let quad: f64 = gh.iter().map(|(x, w)| w * k.ky(y, m + (2.0 * v).sqrt() * x)).sum::<f64>()
                / std::f64::consts::PI.sqrt();
            let exact = k.expected_ky(y, &p);
            assert!((quad - exact).abs() / exact < 1e-10, "{quad} {exact}");
        }
    }

    #[test]
    fn point_masses_at_targets_give_zero() {
        let preds = [GaussianPrediction::new(0.3, 1e-8).unwrap(), GaussianPrediction::new(-1.0, 1e-8).unwrap()];
        let v = skce_regression(&preds, &[0.3, -1.0], SkceKernel::default()).unwrap();
        assert!(v.abs() < 1e-7, "{v}");
    }

    #[test]
    fn matches_brute_force_and_ignores_order() {
        let (preds, ys) = overconfident_gaussians(30, 2.0, 11).unwrap();
        let k = SkceKernel { nu_p: 0.8, nu_y: 1.2 };
        let a = skce_regression(&preds, &ys, k).unwrap();
        let b = skce_regression_pairs(&preds, &ys, k).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} {b}");
        let mut rows: Vec<_> = preds.iter().copied().zip(ys.iter().copied()).collect();
        rows.reverse();
        rows.swap(3, 17);
        let (p2, y2): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        assert_eq!(skce_regression(&p2, &y2, k).unwrap().to_bits(), a.to_bits());
    }

    #[test]
    fn rejects_bad_input() {
        let p = [GaussianPrediction::new(0.0, 1.0).unwrap()];
        assert!(skce_regression(&p, &[0.0], SkceKernel::default()).is_err());
        let bad = SkceKernel { nu_p: 0.0, nu_y: 1.0 };
        assert!(skce_regression(&[p[0], p[0]], &[0.0, 1.0], bad).is_err());
    }
}
