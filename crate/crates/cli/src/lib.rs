//! Batch runner for spin-chain experiments: JSON config in, CSV time series
//! and a JSON manifest out.

pub mod config;
pub mod output;
pub mod runner;
pub mod selftest;

pub use config::{ExperimentConfig, GeometryChoice, Violation};
pub use runner::{run, simulate, RunError, RunManifest, RunResult};
