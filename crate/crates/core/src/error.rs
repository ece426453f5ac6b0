//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument violated a domain precondition (nonpositive distance,
    /// grid size not a power of three, reflector element side out of range,
    /// and so on).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix or list dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A linear-algebra step failed (singular system, SVD non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Block diagonalization cannot carry the requested streams for a user.
    #[error(
        "null space too small for user {user}: needs {needed} dimensions, only {available} available"
    )]
    NullSpaceTooSmall {
        user: usize,
        needed: usize,
        available: usize,
    },

    /// An operation was refused because it would be unreasonably expensive.
    #[error("refused: {0}")]
    Refused(String),

    /// A configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
