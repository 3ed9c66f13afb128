use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}, column `{column}`: `{value}` is not a number")]
    BadValue { path: PathBuf, row: usize, column: String, value: String },
    #[error("plot {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 1 for bad configuration or input, 2 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::MissingColumn { .. } | Error::BadValue { .. } => 1,
            Error::Io { .. } | Error::Csv { .. } | Error::Plot { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
