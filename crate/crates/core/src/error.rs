use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VrpError {
    /// The visit sequence breaks the depot-delimiter rules of its problem kind.
    #[error("malformed solution: {0}")]
    Structure(String),
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),
    /// No feasible solution exists (or can be produced by the procedure).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Text input could not be parsed.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, VrpError>;

pub(crate) fn structure(msg: impl Into<String>) -> VrpError {
    VrpError::Structure(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> VrpError {
    VrpError::Domain(msg.into())
}

pub(crate) fn infeasible(msg: impl Into<String>) -> VrpError {
    VrpError::Infeasible(msg.into())
}
