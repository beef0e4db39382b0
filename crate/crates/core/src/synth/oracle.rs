//! Exact calibration errors of a [`FiniteJointModel`], by enumeration.

use serde::{Deserialize, Serialize};

use super::joint::FiniteJointModel;
use crate::error::{Error, Result};
use crate::estimators::binning::equal_width_bin;

/// Which population quantity to compute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum TrueError {
    /// `(E ||f(X) - P(Y|f(X))||_p^p)^(1/p)`.
    CeP { p: f64 },
    CwceP { p: f64 },
    TceP { p: f64 },
    /// Binned top-label error with `m` equal-width bins.
    Ece { m: usize },
    Ks,
    /// Population MMCE with Laplacian kernel of width `nu`.
    Mmce { nu: f64 },
    /// Expected Brier score.
    Brier,
    /// Brier calibration error `E ||f(X) - P(Y|f(X))||^2`.
    CeBrier,
}

impl TrueError {
    pub fn label(&self) -> String {
        match self {
            TrueError::CeP { p } => format!("ce_{p}"),
            TrueError::CwceP { p } => format!("cwce_{p}"),
            TrueError::TceP { p } => format!("tce_{p}"),
            TrueError::Ece { m } => format!("ece_{m}b"),
            TrueError::Ks => "ks".into(),
            TrueError::Mmce { .. } => "mmce".into(),
            TrueError::Brier => "brier".into(),
            TrueError::CeBrier => "ce_brier".into(),
        }
    }
}

/// Exact value of `which` under `joint`.
///
/// Atoms that share a prediction are treated as unresolved latent inputs:
/// quantities defined through `P(Y | f(X))` (`CeP`, `CeBrier`) use each
/// atom's own conditional, while the binned, class-wise and top-label
/// quantities condition only on the relevant projection of the prediction.
pub fn true_error(joint: &FiniteJointModel, which: TrueError) -> Result<f64> {
    match which {
        TrueError::CeP { p } => {
            check_p(p)?;
            let s: f64 = joint
                .atoms()
                .iter()
                .map(|a| a.pi * a.z.iter().zip(a.q.iter()).map(|(z, q)| (z - q).abs().powf(p)).sum::<f64>())
                .sum();
            Ok(s.powf(1.0 / p))
        }
        TrueError::CwceP { p } => {
            check_p(p)?;
            let mut s = 0.0;
            for k in 0..joint.n_classes() {
                let pts: Vec<(f64, f64, f64)> = joint.atoms().iter().map(|a| (a.z[k], a.pi, a.pi * a.q[k])).collect();
                s += grouped(pts).iter().map(|g| g.w * (g.key - g.hit / g.w).abs().powf(p)).sum::<f64>();
            }
            Ok(s.powf(1.0 / p))
        }
        TrueError::TceP { p } => {
            check_p(p)?;
            let s: f64 = grouped(top_points(joint)).iter().map(|g| g.w * (g.key - g.hit / g.w).abs().powf(p)).sum();
            Ok(s.powf(1.0 / p))
        }
        TrueError::Ece { m } => {
            if m < 1 {
                return Err(Error::config("bin count must be at least 1"));
            }
            let mut w = vec![0.0; m];
            let mut conf = vec![0.0; m];
            let mut hit = vec![0.0; m];
            for (c, pi, h) in top_points(joint) {
                let b = equal_width_bin(c, m);
                w[b] += pi;
                conf[b] += pi * c;
                hit[b] += h;
            }
            Ok((0..m).filter(|&b| w[b] > 0.0).map(|b| (conf[b] - hit[b]).abs()).sum())
        }
        TrueError::Ks => {
            let mut run = 0.0;
            let mut best: f64 = 0.0;
            for g in grouped(top_points(joint)) {
                run += g.w * g.key - g.hit;
                best = best.max(run.abs());
            }
            Ok(best)
        }
        TrueError::Mmce { nu } => {
            if !(nu > 0.0) {
                return Err(Error::config("kernel width must be positive"));
            }
            let g = grouped(top_points(joint));
            let r: Vec<f64> = g.iter().map(|g| g.w * g.key - g.hit).collect();
            let mut s = 0.0;
            for i in 0..g.len() {
                for j in 0..g.len() {
                    s += r[i] * r[j] * (-(g[i].key - g[j].key).abs() / nu).exp();
                }
            }
            Ok(s.max(0.0).sqrt())
        }
        TrueError::Brier => Ok(joint
            .atoms()
            .iter()
            .map(|a| {
                let zz: f64 = a.z.iter().map(|v| v * v).sum();
                let zq: f64 = a.z.iter().zip(a.q.iter()).map(|(z, q)| z * q).sum();
                a.pi * (zz - 2.0 * zq + 1.0)
            })
            .sum()),
        TrueError::CeBrier => Ok(joint.atoms().iter().map(|a| a.pi * a.z.sq_dist(&a.q)).sum()),
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::config(format!("exponent p must be >= 1, got {p}")));
    }
    Ok(())
}

/// (top confidence, weight, weight * P(correct)) per atom.
fn top_points(joint: &FiniteJointModel) -> Vec<(f64, f64, f64)> {
    joint
        .atoms()
        .iter()
        .map(|a| {
            let (c, conf) = a.z.top_label();
            (conf, a.pi, a.pi * a.q[c])
        })
        .collect()
}

struct Group {
    key: f64,
    w: f64,
    hit: f64,
}

/// Merges points with equal keys, sorted by key.
fn grouped(mut pts: Vec<(f64, f64, f64)>) -> Vec<Group> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Group> = Vec::new();
    for (key, w, hit) in pts {
        match out.last_mut() {
            Some(g) if g.key == key => {
                g.w += w;
                g.hit += hit;
            }
            _ => out.push(Group { key, w, hit }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ProbVector;
    use crate::synth::joint::Atom;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_point_ce2() {
        let j = FiniteJointModel::new(vec![Atom { z: pv(&[0.7, 0.3]), pi: 1.0, q: pv(&[0.5, 0.5]) }]).unwrap();
        let ce = true_error(&j, TrueError::CeP { p: 2.0 }).unwrap();
        assert!((ce - 0.2 * 2f64.sqrt()).abs() < 1e-15);
        let ece = true_error(&j, TrueError::Ece { m: 15 }).unwrap();
        assert!((ece - 0.2).abs() < 1e-15);
        let ks = true_error(&j, TrueError::Ks).unwrap();
        assert!((ks - 0.2).abs() < 1e-15);
    }

    #[test]
    fn calibrated_joint_has_zero_errors() {
        let j = FiniteJointModel::new(vec![
            Atom { z: pv(&[0.7, 0.2, 0.1]), pi: 0.5, q: pv(&[0.7, 0.2, 0.1]) },
            Atom { z: pv(&[0.1, 0.3, 0.6]), pi: 0.5, q: pv(&[0.1, 0.3, 0.6]) },
        ])
        .unwrap();
        for w in [
            TrueError::CeP { p: 1.0 },
            TrueError::CeP { p: 2.0 },
            TrueError::CwceP { p: 2.0 },
            TrueError::TceP { p: 1.0 },
            TrueError::Ece { m: 15 },
            TrueError::Ks,
            TrueError::Mmce { nu: 0.4 },
            TrueError::CeBrier,
        ] {
            assert!(true_error(&j, w).unwrap().abs() < 1e-15, "{w:?}");
        }
        // Brier equals the expected Brier entropy 1 - ||q||^2.
        let ent: f64 = j.atoms().iter().map(|a| a.pi * (1.0 - a.q.iter().map(|v| v * v).sum::<f64>())).sum();
        assert!((true_error(&j, TrueError::Brier).unwrap() - ent).abs() < 1e-15);
    }

    #[test]
    fn ks_uses_signed_cumulative() {
        // Over- and under-confidence at different levels cancel in the running sum.
        let j = FiniteJointModel::new(vec![
            Atom { z: pv(&[0.6, 0.4]), pi: 0.5, q: pv(&[0.5, 0.5]) },
            Atom { z: pv(&[0.8, 0.2]), pi: 0.5, q: pv(&[0.9, 0.1]) },
        ])
        .unwrap();
        let ks = true_error(&j, TrueError::Ks).unwrap();
        assert!((ks - 0.05).abs() < 1e-15);
        let tce = true_error(&j, TrueError::TceP { p: 1.0 }).unwrap();
        assert!((tce - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_exponent_rejected() {
        let j = FiniteJointModel::new(vec![Atom { z: pv(&[0.5, 0.5]), pi: 1.0, q: pv(&[0.5, 0.5]) }]).unwrap();
        assert!(true_error(&j, TrueError::CeP { p: 0.5 }).is_err());
    }
}
