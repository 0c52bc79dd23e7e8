//! Desk-scale engine for differentiable architecture search over
//! filter-level compression configurations.
//!
//! The crate searches over two families of compression assignments for a
//! small convolutional network: mixed-precision quantization, where each
//! filter gets a weight/activation bitwidth pair, and channel pruning, where
//! each layer keeps a prefix of its filters. Layer assignments are drawn
//! from trainable distributions (multinomial over operation counts, binomial
//! over widths); the distribution parameters are optimized with a sampled
//! score-function gradient estimator against a loss that combines
//! cross-entropy with an arithmetic-complexity penalty.
//!
//! Modules:
//!
//! - [`arch`] — architecture description and the configuration space.
//! - [`dist`] — configuration distributions, sampling, and their analytic
//!   derivatives.
//! - [`complexity`] — bit-operation and MAC complexity metrics and the
//!   complexity loss.
//! - [`net`] — a small trainable CNN with per-filter-group quantization and
//!   slimmable execution.
//! - [`objective`] — cross-entropy, combined and interpolation losses, and
//!   the exact expected loss.
//! - [`search`] — the sampled gradient estimator and the five search
//!   procedures.
//! - [`oracle`] — exhaustive enumeration, exact gradients, and finite
//!   differences on small instances.
//! - [`harness`] — experiment files, the grid study, result emission, and
//!   the command-line interface.

pub mod arch;
pub mod complexity;
pub mod dist;
pub mod error;
pub mod harness;
pub mod net;
pub mod objective;
pub mod oracle;
pub mod search;
pub mod sigma;
pub mod util;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
