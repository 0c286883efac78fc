use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the augmentation, training, or I/O paths.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has {found} examples, need at least {needed}")]
    InsufficientData { needed: usize, found: usize },

    /// Shape inconsistency tied to a specific example index.
    #[error("example {index}: {message}")]
    DimensionAt { index: usize, message: String },

    /// Shape inconsistency with no meaningful example index.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Simplex violation tied to a specific example index.
    #[error("label of example {index}: {message}")]
    LabelAt { index: usize, message: String },

    /// Simplex violation with no meaningful example index.
    #[error("invalid label: {0}")]
    Label(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed content in a line-oriented input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Well-formed line whose content violates a data-model invariant.
    #[error("{path}:{line}: {message}")]
    Validation {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension_at(index: usize, message: impl Into<String>) -> Self {
        Error::DimensionAt {
            index,
            message: message.into(),
        }
    }

    pub(crate) fn label_at(index: usize, message: impl Into<String>) -> Self {
        Error::LabelAt {
            index,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
