//! Prediction-powered bootstrap inference.
//!
//! Combines a small labeled sample with a large pool of model predictions to
//! build percentile-bootstrap confidence intervals for a range of estimands,
//! with an optional power-tuning parameter, cross-fitted predictions, the
//! usual comparison baselines, and a Monte Carlo coverage harness.

pub mod baselines;
pub mod crossfit;
pub mod dataset;
mod error;
pub mod estimators;
pub mod experiments;
pub mod numeric;
pub mod par;
pub mod ppboot;
pub mod resampling;

pub use error::{Error, ErrorKind, Result};
pub use estimators::{Estimand, EstimandSpec, ReportTransform};
pub use par::Execution;
pub use ppboot::{BootstrapConfig, ConfidenceInterval, LambdaMode};
pub use resampling::RngStream;
