//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by the library and the command-line harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown sigma `{0}` (known: identity, hinge, exp, leaky-relu, sigmoid)")]
    UnknownSigma(String),

    #[error("configuration count overflows 128-bit arithmetic ({filters} filters, {ops} operations)")]
    CountOverflow { filters: usize, ops: usize },

    #[error(
        "configuration space holds {count} entries, above the guard limit {limit}; \
         use the sampled gradient estimator instead of enumeration"
    )]
    SpaceTooLarge { count: u128, limit: u128 },

    #[error("complexity {z} lies outside the anchor range [{min}, {max}]{context}")]
    InterpOutOfRange {
        z: f64,
        min: f64,
        max: f64,
        context: String,
    },

    #[error("non-finite loss {value} for sampled configuration {index}")]
    NonFiniteLoss { index: usize, value: f64 },

    #[error("no configuration satisfies the complexity cap {cap}")]
    InfeasibleCap { cap: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("non-finite value in emitted results: {0}")]
    NonFiniteOutput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
