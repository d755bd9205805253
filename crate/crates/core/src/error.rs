//! Crate-wide error type.
//!
//! Variants are grouped so callers (the CLI in particular) can map them onto
//! distinct exit codes: usage problems, data problems, backend problems, I/O.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset or task-set file failed to parse. `index` is the record
    /// index (array input) or line number (JSONL input), 0-based.
    #[error("parse error in {path} at record {index}: {message}")]
    Parse {
        path: PathBuf,
        index: usize,
        message: String,
    },

    /// A dataset contained no usable records after filtering.
    #[error("no usable records in {path}: {detail}")]
    EmptyDataset { path: PathBuf, detail: String },

    /// A prompt template is malformed or missing a required placeholder.
    #[error("template error: {0}")]
    Template(String),

    /// A scoring/embedding/reward backend failed. `retryable` marks
    /// transport-level failures that a retry loop may recover from.
    #[error("backend error: {message}")]
    Backend { message: String, retryable: bool },

    /// The continuation to score produced zero tokens.
    #[error("continuation tokenizes to zero tokens")]
    EmptyContinuation,

    /// Configuration values violate a precondition (sizes, paths, ranges).
    #[error("configuration error: {0}")]
    Config(String),

    /// A cached artifact was produced under different fingerprints than the
    /// current run and must be recomputed.
    #[error("stale cache: expected fingerprint {expected}, found {found}")]
    StaleCache { expected: String, found: String },

    /// Caller-supplied inputs are inconsistent (length or size mismatches,
    /// empty input where data is required).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An internal invariant was violated; indicates a bug.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn backend(message: impl Into<String>, retryable: bool) -> Self {
        Error::Backend {
            message: message.into(),
            retryable,
        }
    }

    /// True when a retry loop may reasonably re-attempt the operation.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Backend { retryable: true, .. })
    }
}
