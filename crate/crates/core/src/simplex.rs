//! Probability-simplex primitives.
//!
//! A [`ProbVector`] is a categorical distribution over `n >= 2` classes. It is
//! immutable and cheap to clone (the entries live behind an `Arc`), so
//! datasets and resamples can share rows freely across threads.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Internal tolerance on `|sum - 1|` for a valid probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Tolerance accepted on ingestion; rows within it are renormalized.
pub const INGEST_TOL: f64 = 1e-6;

#[derive(Clone, PartialEq)]
pub struct ProbVector(Arc<[f64]>);

impl ProbVector {
    /// Validates entries: length at least 2, all finite and non-negative,
    /// sum within [`SIMPLEX_TOL`] of one.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::check(&values, SIMPLEX_TOL)?;
        Ok(ProbVector(values.into()))
    }

    /// Accepts rows within `tol` of the simplex and renormalizes them.
    pub fn renormalized(mut values: Vec<f64>, tol: f64) -> Result<Self> {
        Self::check(&values, tol)?;
        let s: f64 = values.iter().sum();
        values.iter_mut().for_each(|v| *v /= s);
        Ok(ProbVector(values.into()))
    }

    /// Uniform distribution over `n` classes.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(format!("need at least 2 classes, got {n}")));
        }
        Ok(ProbVector(vec![1.0 / n as f64; n].into()))
    }

    // Construction from values already known to be normalized.
    pub(crate) fn from_normalized(values: Vec<f64>) -> Self {
        debug_assert!(Self::check(&values, 1e-7).is_ok(), "{values:?}");
        ProbVector(values.into())
    }

    fn check(values: &[f64], tol: f64) -> Result<()> {
        if values.len() < 2 {
            return Err(Error::validation(format!(
                "probability vector needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::validation(format!("invalid probability entry {v}")));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::validation(format!(
                "probabilities sum to {s}, outside tolerance {tol:e}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Argmax with ties resolved to the lowest index, and the maximal value.
    pub fn top_label(&self) -> (usize, f64) {
        top_label(self)
    }

    /// Squared Euclidean distance.
    pub fn sq_dist(&self, other: &ProbVector) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

impl Deref for ProbVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for ProbVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Serialize for ProbVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::numeric::exact::vec::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = crate::numeric::exact::vec::deserialize(d)?;
        ProbVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Unnormalized log-probabilities; all entries finite.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("empty logit vector"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite logit {v}")));
        }
        Ok(LogitVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Numerically stable softmax, shifted by the maximal entry.
pub fn softmax(logits: &LogitVector) -> Result<ProbVector> {
    if logits.0.len() < 2 {
        return Err(Error::validation("softmax needs at least 2 logits"));
    }
    Ok(softmax_unchecked(&logits.0))
}

/// Softmax that tolerates `-inf` entries (they map to probability zero).
/// At least one entry must be finite.
pub(crate) fn softmax_unchecked(z: &[f64]) -> ProbVector {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    ProbVector::from_normalized(out)
}

/// `softmax(log p / t)`. Zero entries stay zero.
pub fn temper(p: &ProbVector, t: f64) -> ProbVector {
    let z: Vec<f64> = p.iter().map(|v| v.ln() / t).collect();
    softmax_unchecked(&z)
}

pub fn one_hot(label: usize, n: usize) -> Result<ProbVector> {
    if label >= n {
        return Err(Error::Index { index: label, len: n });
    }
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 classes, got {n}")));
    }
    let mut v = vec![0.0; n];
    v[label] = 1.0;
    Ok(ProbVector(v.into()))
}

/// Index of the largest entry (lowest index wins ties) and its value.
pub fn top_label(p: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    (best, p[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&lv(&[0.0, 0.0])).unwrap().as_slice(), &[0.5, 0.5]);
        for c in [-3.0, 0.0, 17.5] {
            let p = softmax(&lv(&[c; 4])).unwrap();
            assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        }
        let p = softmax(&lv(&[2f64.ln(), 0.0])).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(LogitVector::new(vec![f64::NAN, 0.0]).is_err());
        assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(0, 2).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(one_hot(2, 3).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(one_hot(1, 4).unwrap().as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(one_hot(2, 2), Err(Error::Index { index: 2, len: 2 })));
    }

    #[test]
    fn top_label_examples() {
        assert_eq!(top_label(&[0.2, 0.7, 0.1]), (1, 0.7));
        assert_eq!(top_label(&[0.5, 0.5]), (0, 0.5));
        assert_eq!(top_label(&[0.1, 0.1, 0.8]), (2, 0.8));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbVector::new(vec![1.2, -0.2]).is_err());
        assert!(ProbVector::new(vec![1.0]).is_err());
        let r = ProbVector::renormalized(vec![0.5, 0.5000005], INGEST_TOL).unwrap();
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn temper_handles_zero_entries() {
        let p = ProbVector::new(vec![0.0, 0.25, 0.75]).unwrap();
        let q = temper(&p, 0.5);
        assert_eq!(q[0], 0.0);
        assert!((q[2] - 0.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(z in proptest::collection::vec(-50.0f64..50.0, 2..12), c in -100.0f64..100.0) {
            let a = softmax(&lv(&z)).unwrap();
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let b = softmax(&lv(&shifted)).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn top_label_stable_under_temperature(z in proptest::collection::vec(-10.0f64..10.0, 2..10), t in 0.05f64..20.0) {
            let p = softmax(&lv(&z)).unwrap();
            let scaled: Vec<f64> = z.iter().map(|v| v / t).collect();
            let q = softmax(&lv(&scaled)).unwrap();
            // Exact ties between distinct logits are measure-zero; compare on logits.
            prop_assert_eq!(top_label(&z).0, q.top_label().0);
            prop_assert_eq!(p.top_label().0, top_label(&z).0);
        }
    }
}
