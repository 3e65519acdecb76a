use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by dataset loading, model IO, and the numeric pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dataset is empty (no non-empty lines)")]
    EmptyDataset,

    #[error("line {line} is {len} bytes, over the {cap}-byte cap")]
    LineTooLong { line: usize, len: usize, cap: usize },

    #[error("invalid split: train {n_train} + query {n_query} must leave at least one base string out of {n}")]
    InvalidSplit {
        n_train: usize,
        n_query: usize,
        n: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("symbol {byte:#04x} not in alphabet")]
    UnknownSymbol { byte: u8 },

    #[error("string of {len} bytes exceeds the model input width {max}")]
    StringTooLong { len: usize, max: usize },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("checksum mismatch in {path}")]
    Checksum { path: PathBuf },

    #[error("training diverged: non-finite loss in epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
