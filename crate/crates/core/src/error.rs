//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Corpus file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Embedding text file could not be loaded; `line` is 1-based.
    #[error("embedding load error at line {line}: {message}")]
    EmbeddingLoad { line: usize, message: String },

    /// Annotation TSV could not be parsed; `line` is 1-based.
    #[error("annotation error at line {line}: {message}")]
    Annotation { line: usize, message: String },

    /// Tensor shapes do not agree for the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Checkpoint file is malformed or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training aborted (divergence, empty corpus, bad configuration).
    #[error("training error: {0}")]
    Train(String),

    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn embedding(line: usize, message: impl Into<String>) -> Self {
        Error::EmbeddingLoad {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn annotation(line: usize, message: impl Into<String>) -> Self {
        Error::Annotation {
            line,
            message: message.into(),
        }
    }
}
