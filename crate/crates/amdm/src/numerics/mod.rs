//! Numerical primitives shared by the detectors: windowed rolling statistics,
//! EWMA smoothing, the chi-square quantile, and an online shrinkage covariance
//! estimator with a maintained inverse.
//!
//! Everything here is a single-writer state machine: no internal locking,
//! instances may move between threads between calls, but one instance must
//! never be mutated concurrently.

mod chi_square;
mod covariance;
mod ewma;
mod rolling;

pub use chi_square::{chi_square_cdf, chi_square_quantile, regularized_lower_gamma};
pub use covariance::{CovarianceConfig, OnlineCovariance};
pub use ewma::EwmaState;
pub use rolling::{zscore, RollingWindow};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("non-finite input value {value}")]
    NonFinite { value: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("estimator not ready: has {count} updates, needs {required}")]
    NotReady { count: usize, required: usize },
}
