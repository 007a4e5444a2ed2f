use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        /// 1-based data row (the header is not counted).
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("bootstrap failure: only {retained} of {requested} iterations were usable")]
    BootstrapFailure { retained: usize, requested: usize },

    #[error("power tuning failure: only {retained} usable tuning resamples")]
    TuningFailure { retained: usize },

    #[error("training failed on fold {fold}: {message}")]
    Training { fold: usize, message: String },

    #[error("method `{method}` failed on {failed} of {trials} trials at n = {n}")]
    Study {
        method: String,
        n: usize,
        failed: usize,
        trials: usize,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) => ErrorKind::Argument,
            Error::Schema(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io { .. } => {
                ErrorKind::Data
            }
            Error::Degenerate(_)
            | Error::BootstrapFailure { .. }
            | Error::TuningFailure { .. }
            | Error::Training { .. }
            | Error::Study { .. } => ErrorKind::Estimation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Estimation,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
