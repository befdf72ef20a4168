use std::path::PathBuf;

use crate::spatial::FrameId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("{what} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: &'static str, min_eigenvalue: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("joint {joint} position {value} outside limits [{min}, {max}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("adaptation lost positive definiteness after {retries} step halvings")]
    PdLoss { retries: u32 },

    #[error("simulation diverged at t = {time:.4} s: {reason}")]
    Diverged { time: f64, reason: String },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
