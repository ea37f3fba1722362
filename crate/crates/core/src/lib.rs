//! Treatment-effect estimation for natural experiments.
//!
//! The crate is organised around the life of a benchmark run:
//!
//! - [`dataset`] builds semi-synthetic instances (covariates, both potential
//!   outcomes, true propensities), samples treatment assignments and reads or
//!   writes CSV exports.
//! - [`learners`] holds the regression engines: a closed-form weighted ridge,
//!   a small feed-forward network, and the propensity classifier.
//! - [`estimators`] implements every average-treatment-effect estimator,
//!   including the split-training doubly robust family (Double-Double).
//! - [`variance`] computes the exact finite-sample variance of split-training
//!   estimators and checks it against exhaustive enumeration.
//! - [`metrics`] is the measurement vocabulary: squared error, correlations,
//!   cross entropy, calibration and quartile summaries.
//! - [`bench`] orchestrates seeded benchmark runs and sweeps and renders the
//!   result tables.
//!
//! The runnable programs under `examples/` walk through each of these.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod metrics;
pub mod seed;
pub mod variance;

pub use error::{Error, Result};
