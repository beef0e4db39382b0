use super::GaussianPrediction;
use crate::error::{Error, Result};
use crate::recal::{RecalMap, VARIANCE_FLOOR};

const MAX_STEPS: usize = 2000;
const GRAD_TOL: f64 = 1e-8;

/// Fits `var -> max(w var + b, floor)` by minimizing mean DSS, starting
/// from the identity. Plain gradient descent with a backtracking line
/// search; a step is only taken when it lowers the objective.
///
/// When every predicted variance is the same, `w` and `b` cannot be told
/// apart; the fit then keeps `w = 1` and shifts `b` so the variance matches
/// the mean squared error.
pub fn fit_platt_variance(preds: &[GaussianPrediction], targets: &[f64]) -> Result<RecalMap> {
    if preds.len() < 2 || preds.len() != targets.len() {
        return Err(Error::validation("need equally many predictions and targets, at least 2"));
    }
    let n = preds.len() as f64;
    let r2: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| (p.mean - y).powi(2)).collect();
    let first = preds[0].var;
    if preds.iter().all(|p| p.var == first) {
        let mse = r2.iter().sum::<f64>() / n;
        return Ok(RecalMap::PlattVariance { w: 1.0, b: mse.max(VARIANCE_FLOOR) - first });
    }

    // Work with variances divided by their mean so both coordinates have
    // comparable curvature: v = s (w u + c), b = s c.
    let s = preds.iter().map(|p| p.var).sum::<f64>() / n;
    let u: Vec<f64> = preds.iter().map(|p| p.var / s).collect();
    let floor = VARIANCE_FLOOR / s;
    let objective = |w: f64, c: f64| -> f64 {
        let mut acc = 0.0;
        for (ui, ri) in u.iter().zip(&r2) {
            let v = (w * ui + c).max(floor);
            acc += ri / s / v + v.ln();
        }
        acc / n
    };
    let gradient = |w: f64, c: f64| -> (f64, f64) {
        let (mut gw, mut gc) = (0.0, 0.0);
        for (ui, ri) in u.iter().zip(&r2) {
            let v = w * ui + c;
            if v > floor {
                let d = 1.0 / v - ri / s / (v * v);
                gw += d * ui;
                gc += d;
            }
        }
        (gw / n, gc / n)
    };

    let (mut w, mut c) = (1.0, 0.0);
    let mut f = objective(w, c);
    let mut step = 1.0;
    for _ in 0..MAX_STEPS {
        let (gw, gc) = gradient(w, c);
        let g2 = gw * gw + gc * gc;
        if g2.sqrt() < GRAD_TOL {
            break;
        }
        let mut moved = false;
        for _ in 0..80 {
            let (nw, nc) = (w - step * gw, c - step * gc);
            let nf = objective(nw, nc);
            if nf <= f - 1e-4 * step * g2 {
                (w, c, f) = (nw, nc, nf);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        step *= 2.0;
    }
    Ok(RecalMap::PlattVariance { w, b: c * s })
}

/// Applies a Platt variance map. Returns the new predictions and how many
/// hit the variance floor.
pub fn apply_platt(map: &RecalMap, preds: &[GaussianPrediction]) -> Result<(Vec<GaussianPrediction>, usize)> {
    let mut clamped = 0;
    let out = preds
        .iter()
        .map(|p| {
            let (var, c) = map.apply_variance(p.var)?;
            clamped += c as usize;
            Ok(GaussianPrediction { mean: p.mean, var })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, clamped))
}
