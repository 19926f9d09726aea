//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("infeasible body: {0}")]
    InfeasibleBody(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A sampler produced a point where its own density vanishes.
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidParameter(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        LabError::Unsupported(msg.into())
    }
}
