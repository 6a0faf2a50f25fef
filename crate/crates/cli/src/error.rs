use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wyner_core::Error),
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
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: wyner_core::Error,
    },
    #[error("usage error: {0}")]
    Usage(String),
    /// A resumed sweep found a record it would have to overwrite.
    #[error("{path}: {message}")]
    Conflict { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl CliError {
    /// Bad arguments or inputs, as opposed to I/O or numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, CliError::Usage(_) | CliError::Core(wyner_core::Error::Usage(_) | wyner_core::Error::Validation(_)))
    }
}
