use thiserror::Error;

/// Errors raised by chanlab operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated one of its type invariants.
    #[error("validation failed: {invariant} (residual {residual:.3e})")]
    Validation {
        invariant: &'static str,
        residual: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scale cap exceeded: {0}")]
    ScaleCap(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
