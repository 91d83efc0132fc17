use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("class {class} has {available} samples, {requested} requested")]
    Capacity {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("invalid imbalance profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty score list: {0}")]
    EmptyScores(&'static str),

    #[error("stale or mismatched forward cache: {0}")]
    StaleCache(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
