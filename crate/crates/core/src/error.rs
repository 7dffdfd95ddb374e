use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after normalization")]
    EmptyText,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training error: {0}")]
    Train(String),

    #[error("factor {factor} is constant over the threshold-fitting data")]
    DegenerateFactor { factor: usize },

    #[error("cognitive category c{category} is empty")]
    Lemma1Violation { category: usize },

    #[error("category {category} has {size} members, below the minimum of {min}")]
    InsufficientData {
        category: String,
        size: usize,
        min: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
