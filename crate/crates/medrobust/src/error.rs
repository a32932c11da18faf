//! Error type shared across the crate.
//!
//! Every failure mode is a distinct variant so callers (and the CLI, which
//! maps variants to exit codes) can react to the class of failure without
//! parsing messages.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a structural requirement (shape mismatch,
    /// non-binary exposure, mediator outside support, NaN).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A file could not be parsed into a dataset; the message cites the
    /// offending row and column when known.
    #[error("schema error: {0}")]
    Schema(String),

    /// A model fit did not converge; carries the diagnostics of the last
    /// iterate so callers can inspect how close it got.
    #[error(
        "fit did not converge after {iterations} iterations \
         (max |score| = {max_abs_score:.3e}, tolerance = {tolerance:.1e})"
    )]
    NoConvergence {
        iterations: usize,
        max_abs_score: f64,
        tolerance: f64,
    },

    /// The design matrix is rank deficient on the weighted support.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// An estimator precondition on the data failed (for example an empty
    /// exposure arm), so the estimate is undefined rather than unstable.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A requested quantity is outside its mathematical domain (for example
    /// a risk ratio with a non-positive denominator).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is invalid or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable class label for this error.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Schema(_) => "schema",
            Error::NoConvergence { .. } => "no-convergence",
            Error::SingularDesign(_) => "singular-design",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
