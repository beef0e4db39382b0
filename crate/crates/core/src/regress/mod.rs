//! Calibration of Gaussian predictive distributions for regression.

mod demo;
mod friedman;
mod mdn;
mod platt;
mod skce;

pub use demo::{overconfident_gaussians, variance_demo, DemoConfig, DemoReport, DemoSplit};
pub use friedman::{friedman1, friedman1_mean, Friedman1, RegressionDataset};
pub use mdn::{CurvePoint, Mdn, MdnConfig, TrainingRun};
pub use platt::{apply_platt, fit_platt_variance};
pub use skce::{skce_regression, skce_regression_pairs, SkceKernel};

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean_sd, pairwise_mean};
use crate::recal::VARIANCE_FLOOR;
use crate::scores::ProperScore;

/// A normal predictive distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mean: f64,
    pub var: f64,
}

impl GaussianPrediction {
    pub fn new(mean: f64, var: f64) -> Result<Self> {
        if !mean.is_finite() || !var.is_finite() {
            return Err(Error::validation("Gaussian parameters must be finite"));
        }
        if var < VARIANCE_FLOOR {
            return Err(Error::validation(format!("variance {var} is below the floor {VARIANCE_FLOOR:e}")));
        }
        Ok(GaussianPrediction { mean, var })
    }

    /// Raises the variance to the floor if needed; the flag reports whether
    /// it did.
    pub fn clamped(mean: f64, var: f64) -> (Self, bool) {
        let c = !(var >= VARIANCE_FLOOR);
        (GaussianPrediction { mean, var: if c { VARIANCE_FLOOR } else { var } }, c)
    }
}

/// Dawid-Sebastiani score `(mu - y)^2 / var + ln var`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Dss;

impl ProperScore for Dss {
    type Prediction = GaussianPrediction;
    type Outcome = f64;

    fn name(&self) -> &'static str {
        "dss"
    }

    fn score(&self, p: &GaussianPrediction, y: &f64) -> f64 {
        dss(p, *y)
    }

    fn entropy(&self, q: &GaussianPrediction) -> f64 {
        1.0 + q.var.ln()
    }

    fn entropy_infimum(&self) -> Option<f64> {
        None
    }

    /// Proper, but only strictly so among distributions identified by their
    /// first two moments.
    fn strictly_proper(&self) -> bool {
        false
    }
}

pub fn dss(p: &GaussianPrediction, y: f64) -> f64 {
    (p.mean - y).powi(2) / p.var + p.var.ln()
}

/// DSS with the variance clamped at the floor; the flag reports clamping.
pub fn dss_clamped(mean: f64, var: f64, y: f64) -> (f64, bool) {
    let (p, c) = GaussianPrediction::clamped(mean, var);
    (dss(&p, y), c)
}

pub fn mean_dss(preds: &[GaussianPrediction], targets: &[f64]) -> Result<f64> {
    crate::scores::mean_score(&Dss, preds, targets)
}

/// Summary of a set of Gaussian predictions against targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub avg_var: f64,
    pub mse: f64,
    /// Mean of `(mu - y)^2 / var`.
    pub ratio_mean: f64,
    /// Sample deviation of the ratio; `None` with a single row.
    pub ratio_sd: Option<f64>,
}

pub fn diagnostics(preds: &[GaussianPrediction], targets: &[f64]) -> Result<Diagnostics> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::validation("need equally many predictions and targets, at least one"));
    }
    let vars: Vec<f64> = preds.iter().map(|p| p.var).collect();
    let se: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| (p.mean - y).powi(2)).collect();
    let ratio: Vec<f64> = se.iter().zip(&vars).map(|(s, v)| s / v).collect();
    let (ratio_mean, ratio_sd) = mean_sd(&ratio);
    Ok(Diagnostics { avg_var: pairwise_mean(&vars), mse: pairwise_mean(&se), ratio_mean, ratio_sd })
}

/// Reads `mu,var,y` rows.
pub fn read_predictions_csv<R: Read>(reader: R) -> Result<(Vec<GaussianPrediction>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != ["mu", "var", "y"] {
        return Err(Error::Parse { line: 1, message: format!("expected header mu,var,y, got {}", header.join(",")) });
    }
    let mut preds = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = parse_row(&rec, line, 3)?;
        preds.push(GaussianPrediction::new(vals[0], vals[1]).map_err(|e| Error::Parse { line, message: e.to_string() })?);
        ys.push(vals[2]);
    }
    if preds.is_empty() {
        return Err(Error::validation("no rows"));
    }
    Ok((preds, ys))
}

pub fn write_predictions_csv<W: Write>(mut w: W, preds: &[GaussianPrediction], targets: &[f64]) -> Result<()> {
    writeln!(w, "mu,var,y")?;
    for (p, y) in preds.iter().zip(targets) {
        writeln!(w, "{:?},{:?},{:?}", p.mean, p.var, y)?;
    }
    Ok(())
}

/// Reads `x0..x{d-1},y` rows.
pub fn read_regression_csv<R: Read>(reader: R) -> Result<RegressionDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let d = header.len().saturating_sub(1);
    let ok = d >= 1 && header.last().map(String::as_str) == Some("y") && (0..d).all(|k| header[k] == format!("x{k}"));
    if !ok {
        return Err(Error::Parse { line: 1, message: format!("expected header x0..x{{d-1}},y, got {}", header.join(",")) });
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = parse_row(&rec, line, d + 1)?;
        targets.push(vals.pop().unwrap());
        features.push(vals);
    }
    RegressionDataset::new(features, targets)
}

pub fn load_regression_csv(path: impl AsRef<Path>) -> Result<RegressionDataset> {
    read_regression_csv(std::fs::File::open(path)?)
}

fn parse_row(rec: &csv::StringRecord, line: u64, width: usize) -> Result<Vec<f64>> {
    if rec.len() != width {
        return Err(Error::Parse { line, message: format!("expected {width} fields, got {}", rec.len()) });
    }
    rec.iter()
        .map(|s| {
            let v: f64 = s.parse().map_err(|_| Error::Parse { line, message: format!("bad number '{s}'") })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse { line, message: format!("non-finite value '{s}'") })
            }
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}
