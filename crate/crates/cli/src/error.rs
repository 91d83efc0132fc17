use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] maxsep_core::Error),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed result file {path}: {message}")]
    Result { path: PathBuf, message: String },

    #[error("no results found under {0}")]
    EmptyResults(PathBuf),

    #[error("separation matrix failed verification")]
    VerificationFailed,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
