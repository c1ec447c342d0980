//! Experiment runner: configs, presets, seeded Monte-Carlo execution and
//! CSV + manifest output.
//!
//! Every sweep point `i` draws from the stream `derive(seed, [i])` and
//! every trial `t` of it from `derive(point_seed, [t])`, so output bytes
//! depend only on the config, never on the worker count.

pub mod cli;
mod config;
mod presets;
mod run;

pub use config::{
    AllocationSection, AssociationSection, DensityLink, ExperimentConfig, ExperimentKind, LinkSection,
    NomaSection, SweepSpec, TierSpec,
};
pub use presets::{preset, PRESET_NAMES};
pub use run::{default_output_dir, run_experiment, PointSeed, RunManifest, RunOutput, OUTPUT_ENV};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum EngineError {
    /// Invalid or unreadable configuration.
    #[error("invalid config: {0}")]
    Config(String),
    #[error("sweep point {index} ({variable} = {value}): {message}")]
    Point { index: usize, variable: String, value: f64, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl EngineError {
    /// Process exit code: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::Config(_) => 1,
            _ => 2,
        }
    }
}
