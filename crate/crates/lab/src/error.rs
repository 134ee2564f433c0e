use thiserror::Error;
use vrptight_core::VrpError;
use vrptight_nn::NnError;

/// Failure of a command, classified by process exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("format: {0}")]
    Format(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Other(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Format(_) => 3,
            LabError::Infeasible(_) => 4,
            LabError::Other(_) => 1,
        }
    }
}

impl From<VrpError> for LabError {
    fn from(e: VrpError) -> Self {
        match e {
            VrpError::Format { .. } => LabError::Format(e.to_string()),
            VrpError::Infeasible(_) | VrpError::Structure(_) => LabError::Infeasible(e.to_string()),
            VrpError::Domain(_) => LabError::Usage(e.to_string()),
        }
    }
}

impl From<NnError> for LabError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Routing(inner) => inner.into(),
            NnError::Checkpoint(_) => LabError::Format(e.to_string()),
            NnError::Domain(_) => LabError::Usage(e.to_string()),
            other => LabError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Other(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
