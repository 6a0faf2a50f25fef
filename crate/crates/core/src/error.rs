use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A probability table failed its simplex invariant.
    #[error("invalid distribution: {0}")]
    Validation(String),
    /// Arguments were inconsistent with each other (shapes, axes, cardinalities).
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical error at index {index}: {message}")]
    Numerical { index: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
