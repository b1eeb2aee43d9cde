//! Preset experiments for `aces-core`: each command builds a report from a
//! JSON config and writes it as CSV, JSON and a plain-text summary.

pub mod aces_run;
pub mod appendix;
pub mod commands;
pub mod config;
pub mod confusion;
pub mod error;
pub mod output;
pub mod rb;
pub mod twirl;

pub use config::{ExperimentConfig, NoiseSource, Preset};
pub use error::{CliError, Result};
