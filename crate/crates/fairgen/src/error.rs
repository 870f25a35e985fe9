//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible operand shapes; the message names both sides.
    #[error("shape mismatch in {op}: left is {left}, right is {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    /// A caller-supplied value is outside its valid domain.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// Schema definition is internally inconsistent.
    #[error("invalid schema: {0}")]
    SchemaInvalid(String),

    /// A data file does not conform to its schema.
    #[error("ingestion failed at line {line}: {reason}")]
    Ingest { line: u64, reason: String },

    /// API misuse, e.g. backward with a cache from a different forward.
    #[error("usage error: {0}")]
    Usage(String),

    /// Augmentation asked for more synthetic rows than the pool holds.
    #[error(
        "synthetic pool shortfall for group {predicate}: need {needed} rows, pool has {available}"
    )]
    PoolShortfall {
        predicate: String,
        needed: usize,
        available: usize,
    },

    /// Not enough real rows in the targeted group to form a minibatch.
    #[error("group {predicate} has {available} rows, need at least {needed}")]
    InsufficientRows {
        predicate: String,
        needed: usize,
        available: usize,
    },

    /// Training produced a non-finite loss or parameter.
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("artifact version {found} is not supported (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.into(),
            right: right.into(),
        }
    }
}
