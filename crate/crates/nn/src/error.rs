use thiserror::Error;
use vrptight_core::VrpError;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A softmax row had no admissible entry, or a target was masked.
    #[error("mask error: {0}")]
    Mask(String),
    /// The loss is not connected to any differentiable input of the tape.
    #[error("detached: {0}")]
    Detached(String),
    /// Every action was masked during decoding.
    #[error("dead end: {0}")]
    DeadEnd(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Routing(#[from] VrpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape(msg: impl Into<String>) -> NnError {
    NnError::Shape(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> NnError {
    NnError::Domain(msg.into())
}
