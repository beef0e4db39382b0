//! Sample-based calibration-error estimators.
//!
//! Every estimator takes a [`LabeledPredictions`] and returns a single
//! number. [`EstimatorConfig`] names an estimator together with its
//! parameters and [`estimate`] dispatches on it.

mod binned;
pub mod binning;
mod kernel;

pub use binned::{cwce, ece, tce};
pub use binning::{bin_stats, Bin, BinStats, BinningKind, BinningScheme, Channel};
pub use kernel::{kde_tce, ks, mmce, skce, Bandwidth};

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledPredictions;
use crate::error::{Error, Result};

pub const DEFAULT_MMCE_NU: f64 = 0.4;
pub const DEFAULT_SKCE_NU: f64 = 1.0;

/// An estimator and its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Ece { binning: BinningScheme },
    TceP { p: f64, binning: BinningScheme, debias: bool },
    CwceP { p: f64, binning: BinningScheme },
    Ks,
    KdeTce { p: f64, bandwidth: Bandwidth },
    Mmce { nu: f64 },
    Skce { nu: f64 },
    Rbs,
}

/// Loose parameters as they arrive from a command line; unset fields take
/// per-estimator defaults.
#[derive(Clone, Debug, Default)]
pub struct EstimatorParams {
    pub bins: Option<usize>,
    pub equal_mass: bool,
    pub p: Option<f64>,
    pub debias: bool,
    pub bandwidth: Option<Bandwidth>,
    pub nu: Option<f64>,
}

impl EstimatorConfig {
    /// Builds a config from a name and loose parameters, rejecting
    /// parameters that do not apply to the named estimator.
    pub fn from_parts(name: &str, params: &EstimatorParams) -> Result<Self> {
        let binning = |default: usize| {
            let m = params.bins.unwrap_or(default);
            if params.equal_mass {
                BinningScheme::equal_mass(m)
            } else {
                BinningScheme::equal_width(m)
            }
        };
        let p = || {
            let p = params.p.unwrap_or(2.0);
            binned::check_p(p).map(|_| p)
        };
        let nu = |default: f64| {
            let v = params.nu.unwrap_or(default);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(format!("kernel width must be positive, got {v}")))
            }
        };
        let reject = |what: &str, set: bool| {
            if set {
                Err(Error::config(format!("{what} does not apply to estimator '{name}'")))
            } else {
                Ok(())
            }
        };
        let uses_bins = matches!(name, "ece" | "tce" | "tce_p" | "cwce" | "cwce_p");
        reject("--bins", !uses_bins && params.bins.is_some())?;
        reject("--equal-mass", !uses_bins && params.equal_mass)?;
        reject("--debias", !matches!(name, "tce" | "tce_p") && params.debias)?;
        reject("--bandwidth", name != "kde_tce" && params.bandwidth.is_some())?;
        reject("--nu", !matches!(name, "mmce" | "skce") && params.nu.is_some())?;
        reject("--p", !matches!(name, "tce" | "tce_p" | "cwce" | "cwce_p" | "kde_tce") && params.p.is_some())?;
        let cfg = match name {
            "ece" => EstimatorConfig::Ece { binning: binning(15)? },
            "tce" | "tce_p" => {
                let p = p()?;
                if params.debias && p != 2.0 {
                    return Err(Error::Unsupported(format!("debiasing is only defined for p = 2, got p = {p}")));
                }
                EstimatorConfig::TceP { p, binning: binning(15)?, debias: params.debias }
            }
            "cwce" | "cwce_p" => EstimatorConfig::CwceP { p: p()?, binning: binning(15)? },
            "ks" => EstimatorConfig::Ks,
            "kde_tce" => EstimatorConfig::KdeTce {
                p: params.p.map_or(Ok(1.0), |p| binned::check_p(p).map(|_| p))?,
                bandwidth: params.bandwidth.unwrap_or(Bandwidth::Auto),
            },
            "mmce" => EstimatorConfig::Mmce { nu: nu(DEFAULT_MMCE_NU)? },
            "skce" => EstimatorConfig::Skce { nu: nu(DEFAULT_SKCE_NU)? },
            "rbs" => EstimatorConfig::Rbs,
            _ => {
                return Err(Error::config(format!(
                    "unknown estimator '{name}' (expected one of ece, tce_p, cwce_p, ks, kde_tce, mmce, skce, rbs)"
                )))
            }
        };
        Ok(cfg)
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorConfig::Ece { .. } => "ece",
            EstimatorConfig::TceP { .. } => "tce_p",
            EstimatorConfig::CwceP { .. } => "cwce_p",
            EstimatorConfig::Ks => "ks",
            EstimatorConfig::KdeTce { .. } => "kde_tce",
            EstimatorConfig::Mmce { .. } => "mmce",
            EstimatorConfig::Skce { .. } => "skce",
            EstimatorConfig::Rbs => "rbs",
        }
    }

    /// Short human-readable label, e.g. `15b ECE` or `15mb dTCE_2`.
    pub fn label(&self) -> String {
        match self {
            EstimatorConfig::Ece { binning } => format!("{} ECE", binning.label()),
            EstimatorConfig::TceP { p, binning, debias } => {
                format!("{} {}TCE_{p}", binning.label(), if *debias { "d" } else { "" })
            }
            EstimatorConfig::CwceP { p, binning } => format!("{} CWCE_{p}", binning.label()),
            EstimatorConfig::Ks => "KS".into(),
            EstimatorConfig::KdeTce { p, .. } => format!("KDE TCE_{p}"),
            EstimatorConfig::Mmce { .. } => "MMCE".into(),
            EstimatorConfig::Skce { .. } => "SKCE".into(),
            EstimatorConfig::Rbs => "RBS".into(),
        }
    }

    /// The usual comparison roster. Quadratic-cost kernel estimators are
    /// left out; add them explicitly for small test sets.
    pub fn standard_roster() -> Vec<EstimatorConfig> {
        let w = |m| BinningScheme::equal_width(m).expect("positive bin count");
        vec![
            EstimatorConfig::Ece { binning: w(15) },
            EstimatorConfig::Ece { binning: w(100) },
            EstimatorConfig::CwceP { p: 2.0, binning: w(15) },
            EstimatorConfig::TceP { p: 2.0, binning: BinningScheme::equal_mass(15).expect("positive bin count"), debias: true },
            EstimatorConfig::Ks,
            EstimatorConfig::Mmce { nu: DEFAULT_MMCE_NU },
            EstimatorConfig::Rbs,
        ]
    }
}

/// Estimator output with the metadata needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub n: usize,
    pub config: EstimatorConfig,
    /// Empty bins, for binned estimators.
    pub empty_bins: Option<usize>,
}

/// The bare estimator value.
pub fn evaluate(data: &LabeledPredictions, config: &EstimatorConfig) -> Result<f64> {
    match *config {
        EstimatorConfig::Ece { binning } => ece(data, binning),
        EstimatorConfig::TceP { p, binning, debias } => tce(data, p, binning, debias),
        EstimatorConfig::CwceP { p, binning } => cwce(data, p, binning),
        EstimatorConfig::Ks => ks(data),
        EstimatorConfig::KdeTce { p, bandwidth } => kde_tce(data, p, bandwidth),
        EstimatorConfig::Mmce { nu } => mmce(data, nu),
        EstimatorConfig::Skce { nu } => skce(data, nu),
        EstimatorConfig::Rbs => crate::scores::rbs(data),
    }
}

pub fn estimate(data: &LabeledPredictions, config: &EstimatorConfig) -> Result<Estimate> {
    let value = evaluate(data, config)?;
    let empty_bins = match *config {
        EstimatorConfig::Ece { binning } | EstimatorConfig::TceP { binning, .. } => {
            Some(binned::empty_bins(data, binning, false)?)
        }
        EstimatorConfig::CwceP { binning, .. } => Some(binned::empty_bins(data, binning, true)?),
        _ => None,
    };
    Ok(Estimate { value, n: data.len(), config: *config, empty_bins })
}
