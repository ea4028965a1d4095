//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by dataset handling, testers, trainers and the LP machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("parse error at row {row}, col {col}: {detail}")]
    Parse { row: usize, col: usize, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("multi-index count {count} exceeds cap {cap} (d={d}, degree={degree})")]
    IndexCountExceeded { count: u128, cap: u128, d: usize, degree: u32 },

    #[error("sample budget {computed} exceeds cap {cap}; shrink d or the degree, or grow epsilon")]
    BudgetExceeded { computed: u128, cap: u128 },

    #[error("grid cell count {count} exceeds cap {cap}")]
    CellCapExceeded { count: u128, cap: u128 },

    #[error("rejection sampler exceeded {attempts} attempts per point (slab mass too small)")]
    RejectionSamplingFailed { attempts: u64 },

    #[error("insufficient samples: need at least {needed}, dataset has {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("trainer error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
