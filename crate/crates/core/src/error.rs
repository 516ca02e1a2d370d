use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Data,
    /// The numerics broke down (non-finite loss, degenerate boosting round).
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("all scores are zero")]
    AllZero,
    #[error("negative score {value} at position {index}")]
    NegativeScore { index: usize, value: f64 },
    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("image has no pixels")]
    EmptyImage,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("all sample weights are zero")]
    AllZeroWeights,
    #[error("no votes supplied")]
    EmptyVotes,
    #[error("no model outputs supplied")]
    EmptyInput,
    #[error("{weights} weights supplied for {models} models")]
    WeightMismatch { weights: usize, models: usize },
    #[error("weights must be nonnegative and sum to 1: {0}")]
    BadWeights(String),
    #[error("label spaces differ: {0}")]
    LabelMismatch(String),
    #[error("label space mismatch: {0}")]
    LabelSpaceMismatch(String),
    #[error("tables are not aligned: {0}")]
    Misaligned(String),
    #[error("true labels missing for sample {0}")]
    MissingLabels(String),
    #[error("first boosting round is no better than chance (weighted error {error:.6}, chance level {chance:.6})")]
    DegenerateFirstRound { error: f64, chance: f64 },
    #[error("class {class} has {count} sample(s); at least 2 required for a split")]
    TinyClass { class: String, count: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DegenerateFirstRound { .. } | Error::NonFinite(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::AllZero => "ALL_ZERO",
            Error::NegativeScore { .. } => "NEGATIVE_SCORE",
            Error::Format { .. } => "FORMAT",
            Error::Validation(_) => "VALIDATION",
            Error::Io { .. } => "IO",
            Error::UnsupportedFormat(_) => "UNSUPPORTED_FORMAT",
            Error::EmptyImage => "EMPTY_IMAGE",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::AllZeroWeights => "ALL_ZERO_WEIGHTS",
            Error::EmptyVotes => "EMPTY_VOTES",
            Error::EmptyInput => "EMPTY_INPUT",
            Error::WeightMismatch { .. } => "WEIGHT_MISMATCH",
            Error::BadWeights(_) => "BAD_WEIGHTS",
            Error::LabelMismatch(_) => "LABEL_MISMATCH",
            Error::LabelSpaceMismatch(_) => "LABEL_SPACE_MISMATCH",
            Error::Misaligned(_) => "MISALIGNED",
            Error::MissingLabels(_) => "MISSING_LABELS",
            Error::DegenerateFirstRound { .. } => "DEGENERATE_FIRST_ROUND",
            Error::TinyClass { .. } => "TINY_CLASS",
            Error::EmptyMatrix => "EMPTY_MATRIX",
            Error::NonFinite(_) => "NON_FINITE",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
