use std::io;

use thiserror::Error;

/// Errors produced while loading corpora, building model state or training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value {value} does not fit in a 16-bit packed half")]
    PackOverflow { value: u32 },

    #[error("count overflow: {0}")]
    CountOverflow(String),

    #[error("negative or non-finite weight {weight} at index {index}")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("sample point {point} outside [0, {total}]")]
    OutOfRange { point: f64, total: f64 },

    #[error("empty distribution: all weights are zero")]
    EmptyDistribution,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corpus has no tokens")]
    EmptyCorpus,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
