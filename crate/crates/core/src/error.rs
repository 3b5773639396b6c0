//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QsnnError>;

#[derive(Debug, Error)]
pub enum QsnnError {
    #[error("matrix has a zero dimension ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vector length {0} is not a perfect square")]
    NotPerfectSquare(usize),

    #[error("hamiltonian is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("duration must be finite and non-negative, got {0}")]
    InvalidDuration(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("word index {index} is outside 1..={vocab_size}")]
    InvalidWord { index: usize, vocab_size: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unknown word {word:?} in pair {pair}")]
    UnknownWord { word: String, pair: usize },

    #[error("unknown label {label:?} in pair {pair}")]
    UnknownLabel { label: String, pair: usize },

    #[error("unknown builtin corpus {0:?}")]
    UnknownCorpus(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl QsnnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QsnnError::Io {
            path: path.into(),
            source,
        }
    }
}
