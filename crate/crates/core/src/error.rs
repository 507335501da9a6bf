use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GpError>;

#[derive(Debug, Error)]
pub enum GpError {
    /// Invalid experiment parameters or an unknown identifier.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    /// A tree that breaks arity, layer-typing or bounds invariants.
    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("{path}: row {row}, column {column}: {msg}")]
    Load {
        path: PathBuf,
        row: usize,
        column: String,
        msg: String,
    },

    #[error("evaluation worker failed: {0}")]
    Worker(String),

    /// Broken engine invariant; always a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GpError {
    /// Process exit code: 1 for configuration/usage problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            GpError::Config(_)
            | GpError::Usage(_)
            | GpError::MalformedTree(_)
            | GpError::Parse { .. }
            | GpError::Load { .. }
            | GpError::Json(_) => 1,
            GpError::Worker(_) | GpError::Internal(_) | GpError::Io(_) | GpError::Csv(_) => 2,
        }
    }
}
