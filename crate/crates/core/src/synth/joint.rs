use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};
use crate::numeric::exact;
use crate::simplex::ProbVector;

/// One support point: the model predicts `z` with probability `pi`, and the
/// label is then distributed as `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: ProbVector,
    #[serde(with = "exact")]
    pub pi: f64,
    pub q: ProbVector,
}

/// A joint distribution of (prediction, label) with finite prediction support.
///
/// Atoms normally carry distinct predictions, in which case `q` is exactly
/// `P(Y | f(X) = z)`. Several atoms may share a prediction; they then act as
/// latent inputs `X` that the prediction does not resolve, and
/// [`merged`](Self::merged) collapses them into the genuine conditional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteJointModel {
    support: Vec<Atom>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl FiniteJointModel {
    pub fn new(support: Vec<Atom>) -> Result<Self> {
        let first = support.first().ok_or_else(|| Error::validation("joint needs at least one atom"))?;
        let n = first.z.len();
        for a in &support {
            if a.z.len() != n || a.q.len() != n {
                return Err(Error::validation("atoms disagree on the number of classes"));
            }
            if !(a.pi > 0.0) || !a.pi.is_finite() {
                return Err(Error::validation(format!("atom weight {} must be positive", a.pi)));
            }
        }
        let total: f64 = support.iter().map(|a| a.pi).sum();
        if (total - 1.0).abs() > WEIGHT_TOL * support.len().max(1) as f64 {
            return Err(Error::validation(format!("atom weights sum to {total}")));
        }
        Ok(FiniteJointModel { support })
    }

    /// Builds a joint from unnormalized positive weights.
    pub fn from_weights(atoms: Vec<(ProbVector, f64, ProbVector)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0) {
            return Err(Error::validation("weights must have a positive sum"));
        }
        Self::new(atoms.into_iter().map(|(z, w, q)| Atom { z, pi: w / total, q }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.support
    }

    pub fn n_classes(&self) -> usize {
        self.support[0].z.len()
    }

    pub fn has_distinct_predictions(&self) -> bool {
        let mut keys: Vec<Vec<u64>> = self.support.iter().map(|a| bits(&a.z)).collect();
        keys.sort();
        keys.windows(2).all(|w| w[0] != w[1])
    }

    /// Collapses atoms with bit-identical predictions, averaging their
    /// conditionals by weight.
    pub fn merged(&self) -> FiniteJointModel {
        let mut order: Vec<usize> = (0..self.support.len()).collect();
        let keys: Vec<Vec<u64>> = self.support.iter().map(|a| bits(&a.z)).collect();
        order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
        let n = self.n_classes();
        let mut out: Vec<Atom> = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            let mut w = 0.0;
            let mut acc = vec![0.0; n];
            while j < order.len() && keys[order[j]] == keys[order[i]] {
                let a = &self.support[order[j]];
                w += a.pi;
                for (s, v) in acc.iter_mut().zip(a.q.iter()) {
                    *s += a.pi * v;
                }
                j += 1;
            }
            acc.iter_mut().for_each(|v| *v /= w);
            let s: f64 = acc.iter().sum();
            acc.iter_mut().for_each(|v| *v /= s);
            out.push(Atom { z: self.support[order[i]].z.clone(), pi: w, q: ProbVector::from_normalized(acc) });
            i = j;
        }
        FiniteJointModel { support: out }
    }

    /// Label marginal `P_Y`.
    pub fn marginal(&self) -> ProbVector {
        let mut m = vec![0.0; self.n_classes()];
        for a in &self.support {
            for (s, v) in m.iter_mut().zip(a.q.iter()) {
                *s += a.pi * v;
            }
        }
        let s: f64 = m.iter().sum();
        m.iter_mut().for_each(|v| *v /= s);
        ProbVector::from_normalized(m)
    }

    /// Exact top-label accuracy.
    pub fn accuracy(&self) -> f64 {
        self.support.iter().map(|a| a.pi * a.q[a.z.top_label().0]).sum()
    }

    /// Joint of `h(f(X))` and `Y`: predictions are mapped, labels untouched.
    /// The result may contain repeated predictions when `h` is not injective;
    /// call [`merged`](Self::merged) to condition on the new prediction.
    pub fn map_predictions<F>(&self, mut h: F) -> Result<FiniteJointModel>
    where
        F: FnMut(&ProbVector) -> Result<ProbVector>,
    {
        let support = self
            .support
            .iter()
            .map(|a| Ok(Atom { z: h(&a.z)?, pi: a.pi, q: a.q.clone() }))
            .collect::<Result<Vec<_>>>()?;
        FiniteJointModel::new(support)
    }

    pub fn sampler(&self) -> JointSampler<'_> {
        let mut cum = Vec::with_capacity(self.support.len());
        let mut s = 0.0;
        for a in &self.support {
            s += a.pi;
            cum.push(s);
        }
        JointSampler { joint: self, cum }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: FiniteJointModel = serde_json::from_str(s)?;
        FiniteJointModel::new(raw.support)
    }
}

fn bits(p: &ProbVector) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

/// Draws i.i.d. (prediction, label) pairs from a joint.
pub struct JointSampler<'a> {
    joint: &'a FiniteJointModel,
    cum: Vec<f64>,
}

impl JointSampler<'_> {
    pub fn draw_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cum.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (ProbVector, usize) {
        let a = &self.joint.support[self.draw_atom(rng)];
        (a.z.clone(), draw_categorical(&a.q, rng))
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LabeledPredictions> {
        if n == 0 {
            return Err(Error::validation("sample size must be at least 1"));
        }
        let (p, y): (Vec<_>, Vec<_>) = (0..n).map(|_| self.draw(rng)).unzip();
        LabeledPredictions::new(p, y)
    }
}

/// Samples `n` pairs from `joint`; identical seeds give identical datasets.
pub fn sample(joint: &FiniteJointModel, n: usize, seed: u64) -> Result<LabeledPredictions> {
    joint.sampler().sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Inverse-CDF draw from a categorical distribution.
pub fn draw_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > 0.0 {
            last_positive = k;
        }
        acc += v;
        if u < acc {
            return k;
        }
    }
    last_positive
}
