use std::io;

use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("document is empty after extraction")]
    EmptyDocument,
    #[error("score {0} is outside 1..=5")]
    InvalidScore(i64),
    #[error("stratification infeasible: class {label} has {count} members, need at least {k}")]
    StratificationInfeasible { label: u8, count: usize, k: usize },
    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),
    #[error("bad magic header in {0}")]
    BadMagic(String),
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("checksum mismatch: {0}")]
    ChecksumMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("document {0} is missing from the embedding archive")]
    MissingDocument(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("invalid probability {0}, expected a value in [0, 1)")]
    InvalidProbability(f64),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("prediction carries no attention weights")]
    NoAttention,
    #[error("objective diverged at epoch {epoch}: {value}")]
    DivergedLoss { epoch: usize, value: f64 },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for errors caused by bad input data rather than a defect in the engine.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::NonFinite(_) | Error::NonScalarLoss(_))
    }
}
