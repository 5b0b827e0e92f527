//! Paired sweep runs over controller modes and hyperparameters.
//!
//! Every cell trains the same problem instance with the same seed, so
//! cell-to-cell differences come from the varied dimension alone.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::policy::ControllerMode;
use crate::testbed::problem::SyntheticProblem;
use crate::testbed::train::{train, RunTrace, TrainConfig};
use crate::testbed::TestbedError;

/// Dimensions to sweep. An empty list inherits the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    #[serde(default)]
    pub modes: Vec<ControllerMode>,
    #[serde(default)]
    pub alphas: Vec<u64>,
    #[serde(default)]
    pub num_selected: Vec<usize>,
}

impl AblationGrid {
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty() && self.alphas.is_empty() && self.num_selected.is_empty()
    }
}

/// One grid cell: the base config with up to three fields replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub label: String,
    pub mode: ControllerMode,
    pub alpha: u64,
    pub num_selected: usize,
}

/// Cross product of the grid dimensions, in mode-major order.
pub fn expand_grid(grid: &AblationGrid, base: &TrainConfig) -> Result<Vec<AblationCell>, TestbedError> {
    if grid.is_empty() {
        return Err(TestbedError::InvalidConfig(
            "ablation grid is empty: set modes, alphas, or num_selected".to_string(),
        ));
    }
    let modes = if grid.modes.is_empty() {
        vec![base.mode]
    } else {
        grid.modes.clone()
    };
    let alphas = if grid.alphas.is_empty() {
        vec![base.alpha]
    } else {
        grid.alphas.clone()
    };
    let selected = if grid.num_selected.is_empty() {
        vec![base.selection.num_selected]
    } else {
        grid.num_selected.clone()
    };
    let mut cells = Vec::with_capacity(modes.len() * alphas.len() * selected.len());
    for &mode in &modes {
        for &alpha in &alphas {
            for &num_selected in &selected {
                cells.push(AblationCell {
                    label: format!("{mode}_a{alpha}_n{num_selected}"),
                    mode,
                    alpha,
                    num_selected,
                });
            }
        }
    }
    Ok(cells)
}

/// Result of one cell; failures are recorded, not fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub label: String,
    pub mode: ControllerMode,
    pub alpha: u64,
    pub num_selected: usize,
    /// "ok" or the error message.
    pub status: String,
    pub final_total_loss: Option<f64>,
    pub loss_auc: Option<f64>,
}

/// Summary table over all cells, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<CellOutcome>,
}

impl AblationReport {
    /// Canonical CSV: one row per cell, floats in shortest round-trip
    /// form, empty fields for failed cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,mode,alpha,num_selected,status,final_total_loss,loss_auc\n");
        for cell in &self.cells {
            let final_loss = cell
                .final_total_loss
                .map(|v| v.to_string())
                .unwrap_or_default();
            let auc = cell.loss_auc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cell.label, cell.mode, cell.alpha, cell.num_selected, cell.status, final_loss, auc
            ));
        }
        out
    }
}

/// Per-cell traces alongside the summary, in grid order. Failed cells
/// hold `Err` with the message already recorded in the report.
pub struct AblationRun {
    pub report: AblationReport,
    pub outcomes: Vec<Result<RunTrace, String>>,
    pub cells: Vec<AblationCell>,
}

fn cell_config(base: &TrainConfig, cell: &AblationCell) -> TrainConfig {
    let mut config = base.clone();
    config.mode = cell.mode;
    config.alpha = cell.alpha;
    config.selection.num_selected = cell.num_selected;
    config
}

/// Trains one run per grid cell on a bounded worker pool.
///
/// All cells share the problem instance and the base seed, so results
/// are paired; output order and content are independent of `workers`.
pub fn run_ablation(
    problem: &SyntheticProblem,
    base: &TrainConfig,
    grid: &AblationGrid,
    workers: usize,
) -> Result<AblationRun, TestbedError> {
    let cells = expand_grid(grid, base)?;
    let slots: Mutex<Vec<Option<Result<RunTrace, String>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let worker_count = workers.max(1).min(cells.len());

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= cells.len() {
                    break;
                }
                let config = cell_config(base, &cells[index]);
                let outcome = train(problem, &config).map_err(|e| e.to_string());
                slots.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    let outcomes: Vec<Result<RunTrace, String>> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every cell ran"))
        .collect();
    let report = AblationReport {
        cells: cells
            .iter()
            .zip(&outcomes)
            .map(|(cell, outcome)| match outcome {
                Ok(trace) => CellOutcome {
                    label: cell.label.clone(),
                    mode: cell.mode,
                    alpha: cell.alpha,
                    num_selected: cell.num_selected,
                    status: "ok".to_string(),
                    final_total_loss: Some(trace.final_total_loss),
                    loss_auc: Some(trace.total_loss_auc),
                },
                Err(message) => CellOutcome {
                    label: cell.label.clone(),
                    mode: cell.mode,
                    alpha: cell.alpha,
                    num_selected: cell.num_selected,
                    status: message.clone(),
                    final_total_loss: None,
                    loss_auc: None,
                },
            })
            .collect(),
    };
    Ok(AblationRun {
        report,
        outcomes,
        cells,
    })
}
