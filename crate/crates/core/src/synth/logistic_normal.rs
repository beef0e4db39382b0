use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::simplex::{softmax_unchecked, ProbVector};

/// Softmax of Gaussian logits whose covariance is itself drawn from an
/// inverse-Wishart distribution with scale matrix `I / scale`.
///
/// The covariance is drawn once at construction. Its inverse is
/// `scale * L L^T` with `L` from the Bartlett decomposition, so logits are
/// produced as `L^{-T} e / sqrt(scale)` by back-substitution.
#[derive(Clone, Debug)]
pub struct LogisticNormalModel {
    n: usize,
    // Lower-triangular Bartlett factor, row-major.
    l: Vec<f64>,
    inv_sqrt_scale: f64,
}

impl LogisticNormalModel {
    /// `df` must exceed `n_classes - 1`.
    pub fn new(n_classes: usize, scale: f64, df: f64, seed: u64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::validation("need at least 2 classes"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::validation(format!("scale must be positive, got {scale}")));
        }
        if !(df > (n_classes - 1) as f64) || !df.is_finite() {
            return Err(Error::validation(format!("degrees of freedom {df} must exceed {}", n_classes - 1)));
        }
        let n = n_classes;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Numerical(e.to_string()))?;
            l[i * n + i] = chi.sample(&mut rng).sqrt();
            for j in 0..i {
                l[i * n + j] = StandardNormal.sample(&mut rng);
            }
        }
        Ok(LogisticNormalModel { n, l, inv_sqrt_scale: 1.0 / scale.sqrt() })
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn sample_logits<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.n;
        let e: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        // Solve L^T x = e.
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = e[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.l[k * n + i] * xk;
            }
            x[i] = s / self.l[i * n + i];
        }
        x.iter_mut().for_each(|v| *v *= self.inv_sqrt_scale);
        x
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProbVector {
        softmax_unchecked(&self.sample_logits(rng))
    }

    /// `count` predictions from a fresh stream seeded with `seed`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<ProbVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Convenience constructor with degrees of freedom equal to `n_classes`.
pub fn logistic_normal_model(n_classes: usize, scale: f64, seed: u64) -> Result<LogisticNormalModel> {
    LogisticNormalModel::new(n_classes, scale, n_classes as f64, seed)
}
