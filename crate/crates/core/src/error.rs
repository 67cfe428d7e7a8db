//! Crate error type.

use thiserror::Error;

/// Errors reported by design, solve, and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or inconsistent configuration.
    #[error("validation: {0}")]
    Validation(String),

    /// Config file could not be parsed or failed schema checks.
    #[error("config: {0}")]
    Config(String),

    /// Optimization model has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Numerical routine failed to converge.
    #[error("numerical: {0}")]
    Numerical(String),

    /// Malformed model or data text.
    #[error("parse: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for a validation error.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Shorthand for a parse error.
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// Shorthand for a numerical-failure error.
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
