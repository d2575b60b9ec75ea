//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by model construction and the analytic/numeric pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range (negative power, probability
    /// outside [0,1], inconsistent table, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested computation is only defined on a restricted domain
    /// (e.g. the boundary-value solver needs both dominant service rates to
    /// exceed the corresponding arrival rates).
    #[error("outside the supported domain: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to converge.
    #[error("numerical procedure failed to converge: {0}")]
    NoConvergence(String),

    /// An internal consistency check failed; indicates a bug or a parameter
    /// set outside the model's standing assumptions.
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

/// Convenience result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand constructor for [`Error::InvalidParameter`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Shorthand constructor for [`Error::Domain`].
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Shorthand constructor for [`Error::NoConvergence`].
    pub fn no_convergence(msg: impl Into<String>) -> Self {
        Error::NoConvergence(msg.into())
    }

    /// Shorthand constructor for [`Error::Inconsistent`].
    pub fn inconsistent(msg: impl Into<String>) -> Self {
        Error::Inconsistent(msg.into())
    }
}
