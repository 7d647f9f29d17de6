use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum GmraError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed point file: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at point {point}, axis {axis}")]
    NonFinite { point: usize, axis: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("unknown cell (scale {scale}, index {index})")]
    UnknownCell { scale: i32, index: usize },

    #[error("numeric invariant violated: {0}")]
    Numeric(String),
}

impl GmraError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GmraError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, GmraError>;
