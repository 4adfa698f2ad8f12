use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt input: {0}")]
    CorruptInput(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("memory budget too small: need at least {minimum_bytes} usable bytes, have {usable_bytes}")]
    BudgetTooSmall { minimum_bytes: u64, usable_bytes: u64 },

    #[error("memory budget unavailable: {0}")]
    BudgetUnavailable(String),

    #[error("not enough disk space: need {needed_bytes} bytes, {available_bytes} available")]
    InsufficientDisk { needed_bytes: u64, available_bytes: u64 },

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("job cancelled")]
    Cancelled,

    #[error("chunk {index} failed: {source}")]
    ChunkFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors caused by bad caller input rather than runtime failures.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Parameter(_) | Error::Shape(_) | Error::Bounds(_) => true,
            Error::ChunkFailed { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
