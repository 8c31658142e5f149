use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty file")]
    EmptyFile,

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("unparseable numeric cell `{value}` in column `{column}` (row {row})")]
    UnparseableNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("degenerate labels: only one label class present")]
    DegenerateLabels,

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty part: {0}")]
    EmptyPart(String),

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("leakage: {0} test indices reached a fit or transform step")]
    Leakage(usize),

    #[error("policy has not been fitted")]
    Unfitted,
}

impl Error {
    /// Whether the error stems from user configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Schema(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
