//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("no teacher head for attribute {attribute}")]
    MissingTeacher { attribute: u32 },

    #[error("cohort {attribute} has no samples")]
    CohortEmpty { attribute: u32 },

    #[error("k = {k} outside the supported studentized-range table (2..=10)")]
    UnsupportedK { k: usize },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
