use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum DdmError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("config {key} (line {line}): {msg}")]
    ConfigKey {
        key: String,
        line: usize,
        msg: String,
    },

    #[error("empty batch: a subproblem needs at least one interior point")]
    EmptyBatch,

    #[error("training diverged in subdomain {subdomain} at epoch {epoch}: {msg}")]
    Divergence {
        subdomain: usize,
        epoch: usize,
        msg: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("degenerate metric: {0}")]
    Metric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, DdmError>;

impl DdmError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        DdmError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DdmError::Io {
            path: path.into(),
            source,
        }
    }
}
