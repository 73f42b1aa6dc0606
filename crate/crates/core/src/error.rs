//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Errors surfaced by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A vector or matrix has the wrong length for the operation.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The statistical model is degenerate (e.g. a singular measurement
    /// covariance with zero noise).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// An operation was called on an object in an unusable state.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A numerical routine failed (Cholesky after jitter, etc).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The latent optimization produced a non-finite loss.
    #[error("non-finite loss at step {step} (loss {loss}, |z| {z_norm})")]
    NonFiniteLoss { step: usize, loss: f64, z_norm: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}
