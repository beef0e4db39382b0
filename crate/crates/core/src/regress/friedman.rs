use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature rows and real targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl RegressionDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.len() != targets.len() {
            return Err(Error::validation("need equally many feature rows and targets, at least one"));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|r| r.len() != d) {
            return Err(Error::validation("feature rows must share a positive width"));
        }
        if features.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite value in regression data"));
        }
        Ok(RegressionDataset { features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        for (x, y) in self.features.iter().zip(&self.targets) {
            let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{},{:?}", row.join(","), y)?;
        }
        Ok(())
    }
}

/// Noise-free Friedman-1 response
/// `10 sin(pi x0 x1) + 20 (x2 - 0.5)^2 + 10 x3 + 5 x4`.
pub fn friedman1_mean(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Friedman-1 generator settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Friedman1 {
    pub n: usize,
    /// Total feature count; everything past the fifth feature (except the
    /// sixth, when heteroscedastic) is noise. At least 10.
    pub n_features: usize,
    /// Noise variance `0.5 + x5` instead of `1`.
    pub heteroscedastic: bool,
    /// Read the heteroscedastic term as a standard deviation instead of a variance.
    pub noise_as_std: bool,
    /// Turns the noise off entirely.
    pub noiseless: bool,
}

impl Friedman1 {
    pub fn new(n: usize) -> Self {
        Friedman1 { n, n_features: 10, heteroscedastic: true, noise_as_std: false, noiseless: false }
    }

    /// Noise variance at feature row `x`.
    pub fn noise_var(&self, x: &[f64]) -> f64 {
        if self.noiseless {
            return 0.0;
        }
        if !self.heteroscedastic {
            return 1.0;
        }
        let s = 0.5 + x[5];
        if self.noise_as_std {
            s * s
        } else {
            s
        }
    }

    pub fn generate(&self, seed: u64) -> Result<RegressionDataset> {
        if self.n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        if self.n_features < 10 {
            return Err(Error::validation("Friedman-1 needs at least 10 features"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(self.n);
        let mut targets = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let x: Vec<f64> = (0..self.n_features).map(|_| rng.random::<f64>()).collect();
            let e: f64 = StandardNormal.sample(&mut rng);
            targets.push(friedman1_mean(&x) + self.noise_var(&x).sqrt() * e);
            features.push(x);
        }
        RegressionDataset::new(features, targets)
    }
}

/// `n` heteroscedastic Friedman-1 rows with 10 features.
pub fn friedman1(n: usize, seed: u64, heteroscedastic: bool) -> Result<RegressionDataset> {
    Friedman1 { heteroscedastic, ..Friedman1::new(n) }.generate(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_part() {
        let x = [0.5, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((friedman1_mean(&x) - 10.0).abs() < 1e-12);
        let cfg = Friedman1 { noiseless: true, ..Friedman1::new(50) };
        let d = cfg.generate(3).unwrap();
        for (x, y) in d.features().iter().zip(d.targets()) {
            assert_eq!(*y, friedman1_mean(x));
        }
    }

    #[test]
    fn features_in_unit_cube() {
        let d = friedman1(500, 1, true).unwrap();
        assert_eq!(d.dim(), 10);
        assert!(d.features().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(friedman1(0, 1, true).is_err());
    }

    #[test]
    fn heteroscedastic_slope() {
        // Least-squares slope of squared residuals on x5 estimates d var / d x5 = 1.
        let n = 100_000;
        let d = friedman1(n, 7, true).unwrap();
        let xs: Vec<f64> = d.features().iter().map(|x| x[5]).collect();
        let rs: Vec<f64> = d.features().iter().zip(d.targets()).map(|(x, y)| (y - friedman1_mean(x)).powi(2)).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let mr = rs.iter().sum::<f64>() / n as f64;
        let cov: f64 = xs.iter().zip(&rs).map(|(x, r)| (x - mx) * (r - mr)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = cov / var;
        assert!((slope - 1.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn std_convention_flag() {
        let x = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let f = Friedman1::new(1);
        assert_eq!(f.noise_var(&x), 1.5);
        assert_eq!(Friedman1 { noise_as_std: true, ..f }.noise_var(&x), 2.25);
        assert_eq!(Friedman1 { heteroscedastic: false, ..f }.noise_var(&x), 1.0);
    }
}
