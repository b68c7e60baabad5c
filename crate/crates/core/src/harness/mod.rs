//! Experiment driver: method sweeps, ablations, CSV output and Q-table
//! rendering.

use std::path::PathBuf;

use thiserror::Error;

use crate::heuristics::{HeuristicError, PredictionKind};
use crate::oracle::OracleError;
use crate::pgrid::PgridError;
use crate::qlearning::LearnError;

pub mod config;
pub mod mapgen;
pub mod methods;
pub mod metrics_csv;
pub mod render;
pub mod sweep;

pub use methods::{InitKind, MethodSpec, PredictionSource, RewardKind};
pub use sweep::{run_ablation, run_comparison, run_single, MapCase, SweepConfig, SweepResult, SweepRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{}: {source}", path.display())]
    Pgrid { path: PathBuf, source: PgridError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("method {method} needs a {kind:?} prediction grid")]
    MissingPrediction { method: String, kind: PredictionKind },
    #[error("{0}")]
    Config(String),
}

impl HarnessError {
    /// True for errors caused by bad arguments rather than a failed run.
    pub fn is_usage(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::MissingPrediction { .. })
    }
}
