use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sample stream exhausted: need {needed} samples, have {available}")]
    SamplesExhausted { needed: usize, available: usize },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidDistribution(_)
                | Error::Parse { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptyDataset
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
