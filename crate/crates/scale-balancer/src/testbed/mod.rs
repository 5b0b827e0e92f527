//! Synthetic multi-level problems and an end-to-end trainer.

mod ablation;
mod problem;
mod train;

use thiserror::Error;

use crate::ledger::LedgerError;
use crate::policy::PolicyError;
use crate::weighting::WeightingError;

pub use ablation::{
    expand_grid, run_ablation, AblationCell, AblationGrid, AblationReport, AblationRun,
    CellOutcome,
};
pub use problem::{
    make_problem, Level, LevelSpec, MlpObjective, Objective, ProblemSpec, SyntheticProblem,
    IMBALANCED_5,
};
pub use train::{train, IterationRecord, RunTrace, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum TestbedError {
    #[error("unknown problem preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at iteration {iteration}, level {level}: run diverged")]
    Diverged { iteration: u64, level: usize },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Weighting(#[from] WeightingError),
}
