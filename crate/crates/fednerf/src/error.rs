//! Error types shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid experiment configuration or scene specification.
    #[error("config error: {0}")]
    Config(String),

    /// A caller broke an operation's preconditions (dimension mismatch,
    /// empty input, out-of-range argument).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed wire frame or unexpected message.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The loss became non-finite during local training.
    #[error("training diverged at round {round}, iteration {iteration}: loss is not finite")]
    TrainingDivergence { round: u32, iteration: u32 },

    /// A synchronous round phase did not complete in time (distributed mode).
    #[error("timeout in round {round} while waiting for {phase}")]
    Timeout { round: u32, phase: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 protocol, 4 divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Protocol(_) => 3,
            Error::TrainingDivergence { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
