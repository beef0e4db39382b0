//! Synthetic models with known ground truth.
//!
//! [`FiniteJointModel`] is the oracle: every calibration error of it can be
//! computed exactly with [`true_error`]. Samples drawn from it feed the
//! estimators, so estimator output can be compared against the truth.

mod bias;
mod counterexample;
mod joint;
mod logistic_normal;
mod oracle;

pub use bias::{ece_bias_curvature, ece_bias_mu, ece_bias_slope, folded_normal_mean, BiasApprox, BiasBin};
pub use counterexample::counterexample;
pub use joint::{draw_categorical, sample, Atom, FiniteJointModel, JointSampler};
pub use logistic_normal::{logistic_normal_model, LogisticNormalModel};
pub use oracle::{true_error, TrueError};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};
use crate::simplex::{self, ProbVector};

/// Labels drawn independently from each prediction, so the result is
/// calibrated by construction.
pub fn calibrated_labels(predictions: Vec<ProbVector>, seed: u64) -> Result<LabeledPredictions> {
    if predictions.is_empty() {
        return Err(Error::validation("no predictions to label"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = predictions.iter().map(|p| draw_categorical(p, &mut rng)).collect();
    LabeledPredictions::new(predictions, labels)
}

/// Applies `softmax(log p / t)` to every prediction and keeps the labels.
pub fn temper(data: &LabeledPredictions, t: f64) -> Result<LabeledPredictions> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::validation(format!("temperature must be positive, got {t}")));
    }
    if t == 1.0 {
        return Ok(data.clone());
    }
    data.with_predictions(data.predictions().iter().map(|p| simplex::temper(p, t)).collect())
}

/// Uniform random point of the simplex.
pub fn random_simplex_point<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> ProbVector {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    ProbVector::from_normalized(v)
}

/// A random joint with `support` distinct atoms over `n_classes` classes.
/// Predictions and conditionals are independent uniform simplex points;
/// weights are random and positive.
pub fn random_joint(n_classes: usize, support: usize, seed: u64) -> Result<FiniteJointModel> {
    if n_classes < 2 || support == 0 {
        return Err(Error::validation("need at least 2 classes and 1 atom"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = (0..support)
        .map(|_| {
            let z = random_simplex_point(n_classes, &mut rng);
            let q = random_simplex_point(n_classes, &mut rng);
            let w: f64 = Exp1.sample(&mut rng);
            (z, w + 1e-3, q)
        })
        .collect();
    FiniteJointModel::from_weights(atoms)
}

/// A calibrated joint over a pool of predictions: every prediction gets equal
/// weight and its own conditional. With `t != 1` the predictions are
/// tempered while the conditionals keep the originals, giving a known
/// miscalibration.
pub fn pool_joint(predictions: &[ProbVector], t: f64) -> Result<FiniteJointModel> {
    if predictions.is_empty() {
        return Err(Error::validation("empty prediction pool"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::validation(format!("temperature must be positive, got {t}")));
    }
    let w = 1.0 / predictions.len() as f64;
    let atoms = predictions
        .iter()
        .map(|p| {
            let z = if t == 1.0 { p.clone() } else { simplex::temper(p, t) };
            (z, w, p.clone())
        })
        .collect();
    FiniteJointModel::from_weights(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_labels_follow_predictions() {
        let p = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let d = calibrated_labels(vec![p; 100], 4).unwrap();
        assert!(d.labels().iter().all(|&y| y == 0));

        let half = ProbVector::new(vec![0.5, 0.5]).unwrap();
        let n = 20_000;
        let d = calibrated_labels(vec![half; n], 4).unwrap();
        let ones = d.labels().iter().filter(|&&y| y == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn temper_keeps_labels_and_argmax() {
        let m = logistic_normal_model(5, 0.1, 2).unwrap();
        let d = calibrated_labels(m.sample_many(200, 3), 5).unwrap();
        assert_eq!(temper(&d, 1.0).unwrap(), d);
        let t = temper(&d, 0.5).unwrap();
        assert_eq!(t.labels(), d.labels());
        for (a, b) in d.predictions().iter().zip(t.predictions()) {
            assert_eq!(a.top_label().0, b.top_label().0);
        }
        assert!(temper(&d, 0.0).is_err());
    }

    #[test]
    fn random_joint_is_valid() {
        let j = random_joint(3, 8, 1).unwrap();
        assert_eq!(j.atoms().len(), 8);
        assert!(j.has_distinct_predictions());
    }
}
