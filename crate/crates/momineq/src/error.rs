//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset handling, model evaluation, sampling,
/// optimization and selection routines.
#[derive(Debug, Error)]
pub enum Error {
    /// I/O failure while reading or writing files.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV encoding or decoding failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Malformed or inconsistent tabular data.
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Incompatible dimensions between arguments.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The target function returned NaN or +inf during sampling or
    /// optimization.
    #[error("broken target function: {0}")]
    BrokenTarget(String),

    /// Optimization could not produce a usable result.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Numerical integration failed to converge or was misconfigured.
    #[error("integration failed: {0}")]
    Integration(String),

    /// A Monte Carlo estimate violated a certified analytic bound by more
    /// than its noise allowance; indicates an internal defect.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    /// Malformed experiment configuration.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
