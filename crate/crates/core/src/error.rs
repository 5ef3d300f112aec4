//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by reward, provider, optimization and dataset operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("clip not found: {0}")]
    ClipNotFound(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),

    #[error("group too small: need at least 2 completions, got {0}")]
    GroupTooSmall(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("fixture missing: {0}")]
    FixtureMissing(String),

    #[error("malformed subtitle: {0}")]
    Subtitle(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    /// Log-prob and advantage records do not pair up on `(sample_id, g)`.
    #[error("join mismatch: {0}")]
    Join(String),

    #[error("completion {index}: {dimension} reward failed: {source}")]
    Reward {
        index: usize,
        dimension: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
