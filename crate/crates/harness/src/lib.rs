//! Experiment runner: resolves a configuration, trains the requested model
//! and writes a trace CSV, a JSON summary and SVG plots.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod data;
pub mod plot;
pub mod train;

pub use commands::{compare, drift_study, run, CompareOptions, XAxis};
pub use config::{Algorithm, ConfigLayer, ExperimentConfig, MeasureId};

use nondecomp_core::optimizers::TrainTrace;

/// Errors surfaced by the CLI, each with its exit status.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad flags, bad configuration or an incompatible combination.
    #[error("usage: {0}")]
    Usage(String),
    /// Training hit a non-finite value; the partial trace has been written.
    #[error("training diverged: {message}")]
    Diverged {
        message: String,
        partial: Box<TrainTrace>,
    },
    #[error(transparent)]
    Core(#[from] nondecomp_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Diverged { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
