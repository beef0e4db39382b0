use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::joint::{Atom, FiniteJointModel};
use crate::error::{Error, Result};
use crate::simplex::{one_hot, ProbVector};

/// A joint whose class-wise and top-label errors all vanish while its
/// canonical calibration error stays close to its maximum.
///
/// Predictions are `support_size` distinct points near the uniform vector
/// with `E ||z||^2 <= 1/n + epsilon`. Each point is split into `n` latent
/// sub-atoms; sub-atom `k` carries weight `pi_j * z_jk` and label `k` with
/// certainty. Conditioning only on the prediction gives back `z`, so every
/// error that depends on a projection of the prediction is zero, while
/// `ce_2^2 = 1 - E ||z||^2`.
pub fn counterexample(n_classes: usize, epsilon: f64, support_size: usize, seed: u64) -> Result<FiniteJointModel> {
    if n_classes < 2 {
        return Err(Error::validation("need at least 2 classes"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::validation(format!("epsilon must be positive, got {epsilon}")));
    }
    if support_size == 0 {
        return Err(Error::validation("support size must be at least 1"));
    }
    let n = n_classes as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = 1.0 / support_size as f64;
    let mut atoms = Vec::with_capacity(support_size * n_classes);
    for j in 0..support_size {
        let z = if j == 0 {
            ProbVector::uniform(n_classes)?
        } else {
            // Random sum-zero direction with a radius that grows with j, so
            // every point is distinct and stays strictly inside the simplex.
            let mut d: Vec<f64> = (0..n_classes).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = d.iter().sum::<f64>() / n;
            d.iter_mut().for_each(|v| *v -= mean);
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let max_abs = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !(norm > 0.0) {
                return Err(Error::Numerical("degenerate perturbation direction".into()));
            }
            let r_max = (epsilon / 2.0).sqrt().min(0.5 / n * norm / max_abs);
            let r = r_max * j as f64 / (support_size - 1) as f64;
            let v: Vec<f64> = d.iter().map(|x| 1.0 / n + r * x / norm).collect();
            ProbVector::renormalized(v, 1e-9)?
        };
        for k in 0..n_classes {
            atoms.push(Atom { z: z.clone(), pi: pi * z[k], q: one_hot(k, n_classes)? });
        }
    }
    let joint = FiniteJointModel::new(atoms)?;
    if !joint.merged().has_distinct_predictions() || joint.merged().atoms().len() != support_size {
        return Err(Error::Numerical("could not construct distinct support points".into()));
    }
    Ok(joint)
}
