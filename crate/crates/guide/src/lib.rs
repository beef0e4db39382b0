//! The guide chapters under `book/src`, compiled so that `cargo test`
//! runs every Rust snippet in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/estimators.md")]
pub mod estimators {}
#[doc = include_str!("../../../book/src/scores.md")]
pub mod scores {}
#[doc = include_str!("../../../book/src/recalibration.md")]
pub mod recalibration {}
#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}
#[doc = include_str!("../../../book/src/regression.md")]
pub mod regression {}
#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
