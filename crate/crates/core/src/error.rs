use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("negative sales at line {line}")]
    NegativeSales { line: usize },

    #[error("duplicate observation for item {item:?} on {day}")]
    DuplicateKey { item: String, day: NaiveDate },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("value outside the loss/transform domain: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("feature vector has {got} entries, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("total actual over the horizon is zero")]
    ZeroActual,

    #[error("no item has positive actuals in the horizon")]
    NoValidItems,

    #[error("baseline has zero wmape or zero wbias")]
    DegenerateBaseline,

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_) | Error::InsufficientHistory(_))
    }
}
