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

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported array: {0}")]
    UnsupportedArray(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid embedding set: {0}")]
    InvalidSet(String),

    #[error("requested {requested} rows but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("operation requires class labels")]
    LabelsRequired,

    #[error("invalid class split: {0}")]
    InvalidSplit(String),

    #[error("dimension mismatch: {left} vs {right}")]
    Dim { left: usize, right: usize },

    #[error("k = {k} exceeds the {available} available neighbors")]
    KTooLarge { k: usize, available: usize },

    #[error("index pairing broken: reference has {reference} rows, evaluation has {evaluation}")]
    IndexPairing { reference: usize, evaluation: usize },

    #[error("diagram contains an essential (infinite) bar")]
    InfiniteBar,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
