//! Weight-update actions over interval statistics.
//!
//! Four schemes are available at each interval boundary:
//!
//! * `a0` — boost the levels whose variance dropped fastest,
//! * `a1` — boost the levels with the smallest interval loss,
//! * `a2` — boost the levels with the largest interval loss,
//! * `a3` — reset every weight to 1.
//!
//! For `a0`..`a2` the selected level `j` gets
//! `w_j = 1 + lambda * L_{j,t} / sum_i L_{i,t}`, with the larger lambda
//! for the level ranked most extreme under the action's own criterion and
//! the smaller lambda for the rest. Unselected levels stay at 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{IntervalStats, WeightVector};

#[derive(Debug, Error, PartialEq)]
pub enum WeightingError {
    #[error("num_selected must be between 1 and {num_levels}, got {num_selected}")]
    BadSelectionCount {
        num_selected: usize,
        num_levels: usize,
    },
    #[error("lambda values must satisfy primary >= secondary > 0, got {primary} / {secondary}")]
    BadLambdas { primary: f64, secondary: f64 },
}

/// The closed set of weight-update actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    /// `a0`: boost the levels with the largest variance reduction rate.
    #[serde(rename = "a0")]
    MaxVarianceReduction,
    /// `a1`: boost the levels with the smallest interval loss.
    #[serde(rename = "a1")]
    MinIntervalLoss,
    /// `a2`: boost the levels with the largest interval loss.
    #[serde(rename = "a2")]
    MaxIntervalLoss,
    /// `a3`: reset every weight to 1.
    #[serde(rename = "a3")]
    ResetToOne,
}

impl Action {
    /// All actions in index order `a0..a3`.
    pub const ALL: [Action; 4] = [
        Action::MaxVarianceReduction,
        Action::MinIntervalLoss,
        Action::MaxIntervalLoss,
        Action::ResetToOne,
    ];

    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            Action::MaxVarianceReduction => 0,
            Action::MinIntervalLoss => 1,
            Action::MaxIntervalLoss => 2,
            Action::ResetToOne => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.index())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a0" => Ok(Action::MaxVarianceReduction),
            "a1" => Ok(Action::MinIntervalLoss),
            "a2" => Ok(Action::MaxIntervalLoss),
            "a3" => Ok(Action::ResetToOne),
            other => Err(format!("unknown action {other:?}, expected a0..a3")),
        }
    }
}

/// How many levels an action boosts and by how much.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Number of levels to boost (`N`).
    pub num_selected: usize,
    /// Amplification for the top-ranked selected level.
    pub lambda_primary: f64,
    /// Amplification for the remaining selected levels.
    pub lambda_secondary: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            num_selected: 2,
            lambda_primary: 1.5,
            lambda_secondary: 1.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self, num_levels: usize) -> Result<(), WeightingError> {
        if self.num_selected == 0 || self.num_selected > num_levels {
            return Err(WeightingError::BadSelectionCount {
                num_selected: self.num_selected,
                num_levels,
            });
        }
        let ok = self.lambda_primary.is_finite()
            && self.lambda_secondary.is_finite()
            && self.lambda_secondary > 0.0
            && self.lambda_primary >= self.lambda_secondary;
        if !ok {
            return Err(WeightingError::BadLambdas {
                primary: self.lambda_primary,
                secondary: self.lambda_secondary,
            });
        }
        Ok(())
    }
}

/// Levels an action selects for boosting, most extreme first.
///
/// Ties break toward the lower level index, so selection is fully
/// deterministic. `a3` selects nothing.
pub fn select_levels(
    action: Action,
    stats: &IntervalStats,
    config: &SelectionConfig,
) -> Vec<usize> {
    if action == Action::ResetToOne {
        return Vec::new();
    }
    let num_levels = stats.num_levels();
    assert!(
        config.num_selected >= 1 && config.num_selected <= num_levels,
        "selection config must be validated against the level count"
    );
    let (key, ascending): (&[f64], bool) = match action {
        Action::MaxVarianceReduction => (&stats.reduction_rate, false),
        Action::MinIntervalLoss => (&stats.interval_loss, true),
        Action::MaxIntervalLoss => (&stats.interval_loss, false),
        Action::ResetToOne => unreachable!(),
    };
    let mut order: Vec<usize> = (0..num_levels).collect();
    order.sort_by(|&a, &b| {
        let by_key = if ascending {
            key[a].total_cmp(&key[b])
        } else {
            key[b].total_cmp(&key[a])
        };
        by_key.then(a.cmp(&b))
    });
    order.truncate(config.num_selected);
    order
}

/// Weights produced by executing `action` on `stats`.
///
/// A zero total interval loss makes the boost ratio undefined; that only
/// happens when every level is already at exactly zero loss, so the
/// result falls back to all ones.
pub fn apply_action(
    action: Action,
    stats: &IntervalStats,
    config: &SelectionConfig,
) -> WeightVector {
    let num_levels = stats.num_levels();
    if action == Action::ResetToOne {
        return WeightVector::all_ones(num_levels);
    }
    let total: f64 = stats.total_interval_loss();
    if total <= 0.0 {
        log::warn!("total interval loss is zero at t={}; keeping unit weights", stats.t);
        return WeightVector::all_ones(num_levels);
    }
    let selected = select_levels(action, stats, config);
    let mut weights = vec![1.0; num_levels];
    for (rank, &level) in selected.iter().enumerate() {
        let lambda = if rank == 0 {
            config.lambda_primary
        } else {
            config.lambda_secondary
        };
        weights[level] = 1.0 + lambda * stats.interval_loss[level] / total;
    }
    WeightVector::from_raw(weights)
}
