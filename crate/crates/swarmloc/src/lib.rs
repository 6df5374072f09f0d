//! Scenario runner for multi-UAV mutual localization.
//!
//! Wraps the numerics in `swarmloc-core` with fleet mobility, the per-tick
//! attack/defense pipeline, the solver and step-size benchmarks, sweep
//! orchestration and CSV/JSON output.

pub mod bench;
pub mod cache;
pub mod config;
pub mod engine;
mod error;
pub mod output;
pub mod sweep;
pub mod world;

pub use error::{ConfigError, SimError};
