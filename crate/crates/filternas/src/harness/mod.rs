//! Experiment orchestration: on-disk formats, the grid variance study,
//! result emission, the verification suite, and the command-line interface.
//!
//! Everything is deterministic in (spec, seed): worker seeds derive from
//! the master seed via [`crate::util::derive_seed`], jobs collect in index
//! order, and emitted tables exclude wall-clock fields.

pub mod check;
pub mod cli;
pub mod emit;
pub mod files;
pub mod grid;

pub use check::{run_oracle_check, CheckLine, CheckReport};
pub use emit::{emit_grid, emit_trace};
pub use files::{
    load_alpha, load_arch, load_config, Algorithm, DatasetSpec, ExperimentSpec, GridSettings,
    InterpSettings,
};
pub use grid::{confidence_interval, grid_configs, normal_quantile, run_grid_study, GridResult};
