use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite numeric input: {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported audio format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("corpus indexing failed: {reason}; offending paths: {paths:?}")]
    Index { reason: String, paths: Vec<PathBuf> },

    #[error("phone map is full ({capacity} entries), cannot add {phone:?}")]
    PhoneMapFull { capacity: usize, phone: String },

    #[error("cache error in {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("oracle refused: {0}")]
    OracleLimit(String),

    #[error("i/o error on {path}: {source}")]
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
}
