//! Calibration-error estimation, proper scores and recalibration.
//!
//! The crate is organized bottom-up:
//!
//! - [`simplex`] and [`dataset`]: probability vectors, labeled predictions, CSV I/O.
//! - [`scores`]: proper scores, the expected-score decomposition and the
//!   calibration upper bound (RBS is its square root for the Brier score).
//! - [`estimators`]: binned, cumulative and kernel calibration-error estimators.
//! - [`recal`]: temperature scaling and friends, and improvement measurement.
//! - [`synth`]: finite joint distributions with exact ("oracle") errors.
//! - [`regress`]: Gaussian predictive distributions and variance recalibration.
//! - [`harness`]: test-set-size sweeps with repeated subsampling.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numeric;
pub mod optim;
pub mod recal;
pub mod regress;
pub mod scores;
pub mod simplex;
pub mod synth;

pub use dataset::{load_csv, ColumnFormat, LabeledPredictions, Split};
pub use error::{Error, ErrorClass, Result};
pub use estimators::{estimate, EstimatorConfig};
pub use simplex::{one_hot, softmax, top_label, LogitVector, ProbVector};
pub use synth::FiniteJointModel;
