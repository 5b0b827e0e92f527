//! Per-level loss bookkeeping and interval statistics.
//!
//! A [`LossTrace`] accumulates one loss value per (iteration, level). At
//! every interval boundary `t` the trace yields, per level:
//!
//! * the interval loss  `L_{i,t} = sum of losses over ((t-1)*alpha, t*alpha]`,
//! * the interval variance `Var_{i,t}` (sample variance over the window),
//! * the variance reduction rate
//!   `r_{i,t} = (Var_{i,t-1} - Var_{i,t}) / (Var_{i,t-1} + eps)`.
//!
//! Windows are recomputed from the stored records rather than streamed;
//! with interval lengths of a few hundred this is cheap and keeps the
//! arithmetic order identical between online runs and offline replays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stabilizer for the variance reduction rate denominator.
pub const VARIANCE_EPSILON: f64 = 0.00001;

/// Variance assumed for the interval before training starts (`Var_{i,0}`).
pub const INITIAL_VARIANCE: f64 = 1.0;

/// Reduction rate reported for the first interval (`r_{i,1}`).
pub const INITIAL_REDUCTION_RATE: f64 = 0.0;

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("non-finite loss at iteration {iteration}, level {level}")]
    NonFiniteLoss { iteration: u64, level: usize },
    #[error("negative loss {value} at iteration {iteration}, level {level}")]
    NegativeLoss {
        iteration: u64,
        level: usize,
        value: f64,
    },
    #[error("duplicate record for iteration {iteration}, level {level}")]
    DuplicateRecord { iteration: u64, level: usize },
    #[error(
        "out-of-order record for level {level}: iteration {iteration} after {last_iteration}"
    )]
    OutOfOrderRecord {
        iteration: u64,
        level: usize,
        last_iteration: u64,
    },
    #[error("iteration numbers start at 1, got 0 for level {level}")]
    ZeroIteration { level: usize },
    #[error("level {level} out of range for a trace with {num_levels} levels")]
    LevelOutOfRange { level: usize, num_levels: usize },
    #[error("interval index starts at 1, got 0")]
    ZeroInterval,
    #[error("interval length must be at least 1")]
    ZeroAlpha,
    #[error("interval length must be at least 2 for a variance, got {alpha}")]
    AlphaTooSmall { alpha: u64 },
    #[error(
        "level {level}, interval {t}: window ({start}..={end}) has {present} of {expected} \
         iterations; first missing is {first_missing}"
    )]
    MissingIterations {
        level: usize,
        t: u64,
        start: u64,
        end: u64,
        present: u64,
        expected: u64,
        first_missing: u64,
    },
    #[error("length mismatch: {losses} losses vs {weights} weights")]
    LengthMismatch { losses: usize, weights: usize },
}

/// Raw per-level, per-iteration loss stream.
///
/// One value per (iteration, level); iterations within a level are
/// strictly increasing and every value is finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace {
    num_levels: usize,
    levels: Vec<LevelSeries>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct LevelSeries {
    iterations: Vec<u64>,
    losses: Vec<f64>,
}

impl LossTrace {
    /// An empty trace over `num_levels` loss streams.
    pub fn new(num_levels: usize) -> Self {
        assert!(num_levels > 0, "a trace needs at least one level");
        LossTrace {
            num_levels,
            levels: vec![LevelSeries::default(); num_levels],
        }
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    /// Total number of recorded (iteration, level) entries.
    pub fn len(&self) -> usize {
        self.levels.iter().map(|s| s.iterations.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records one loss value. Values must arrive in increasing iteration
    /// order within each level.
    pub fn record(&mut self, iteration: u64, level: usize, value: f64) -> Result<(), LedgerError> {
        if level >= self.num_levels {
            return Err(LedgerError::LevelOutOfRange {
                level,
                num_levels: self.num_levels,
            });
        }
        if iteration == 0 {
            return Err(LedgerError::ZeroIteration { level });
        }
        if !value.is_finite() {
            return Err(LedgerError::NonFiniteLoss { iteration, level });
        }
        if value < 0.0 {
            return Err(LedgerError::NegativeLoss {
                iteration,
                level,
                value,
            });
        }
        let series = &mut self.levels[level];
        if let Some(&last) = series.iterations.last() {
            if iteration == last {
                return Err(LedgerError::DuplicateRecord { iteration, level });
            }
            if iteration < last {
                return Err(LedgerError::OutOfOrderRecord {
                    iteration,
                    level,
                    last_iteration: last,
                });
            }
        }
        series.iterations.push(iteration);
        series.losses.push(value);
        Ok(())
    }

    /// All records as (iteration, level, loss), sorted by iteration then level.
    pub fn records(&self) -> Vec<(u64, usize, f64)> {
        let mut out: Vec<(u64, usize, f64)> = Vec::with_capacity(self.len());
        for (level, series) in self.levels.iter().enumerate() {
            for (&iteration, &loss) in series.iterations.iter().zip(&series.losses) {
                out.push((iteration, level, loss));
            }
        }
        out.sort_by_key(|&(iteration, level, _)| (iteration, level));
        out
    }

    /// Length of the complete prefix `1..=n` recorded for `level`.
    pub fn contiguous_len(&self, level: usize) -> u64 {
        // iterations[k] >= k + 1 always, and iterations[k] - k is
        // non-decreasing, so "iterations[k] == k + 1" is a prefix predicate.
        let series = &self.levels[level];
        let mut lo = 0usize;
        let mut hi = series.iterations.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if series.iterations[mid] == mid as u64 + 1 {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo as u64
    }

    /// The loss window for interval `t` of `level`, in iteration order.
    fn window(&self, level: usize, t: u64, alpha: u64) -> Result<&[f64], LedgerError> {
        if level >= self.num_levels {
            return Err(LedgerError::LevelOutOfRange {
                level,
                num_levels: self.num_levels,
            });
        }
        if t == 0 {
            return Err(LedgerError::ZeroInterval);
        }
        if alpha == 0 {
            return Err(LedgerError::ZeroAlpha);
        }
        let start = (t - 1) * alpha + 1;
        let end = t * alpha;
        let series = &self.levels[level];
        let lo = series.iterations.partition_point(|&m| m < start);
        let hi = series.iterations.partition_point(|&m| m <= end);
        let present = (hi - lo) as u64;
        if present != alpha {
            let mut first_missing = start;
            for (offset, &m) in series.iterations[lo..hi].iter().enumerate() {
                if m != start + offset as u64 {
                    break;
                }
                first_missing = m + 1;
            }
            return Err(LedgerError::MissingIterations {
                level,
                t,
                start,
                end,
                present,
                expected: alpha,
                first_missing,
            });
        }
        Ok(&series.losses[lo..hi])
    }

    /// Interval loss `L_{level,t}`: the sum of losses over
    /// `((t-1)*alpha, t*alpha]`.
    pub fn interval_loss(&self, level: usize, t: u64, alpha: u64) -> Result<f64, LedgerError> {
        let window = self.window(level, t, alpha)?;
        Ok(window.iter().sum())
    }

    /// Interval variance `Var_{level,t}`: centered sum of squares over the
    /// window divided by `alpha - 1`, with the mean taken over all `alpha`
    /// window values.
    pub fn interval_variance(&self, level: usize, t: u64, alpha: u64) -> Result<f64, LedgerError> {
        if alpha < 2 {
            return Err(LedgerError::AlphaTooSmall { alpha });
        }
        let window = self.window(level, t, alpha)?;
        let sum: f64 = window.iter().sum();
        let mean = sum / alpha as f64;
        let centered: f64 = window.iter().map(|&x| (x - mean) * (x - mean)).sum();
        Ok(centered / (alpha - 1) as f64)
    }

    /// All per-level statistics for interval `t`.
    ///
    /// Reduction rates follow the initial-value convention: `r` is the
    /// fixed [`INITIAL_REDUCTION_RATE`] at `t = 1` and is first genuinely
    /// evaluated at `t = 2` from the two computed variances.
    pub fn interval_stats(&self, t: u64, alpha: u64) -> Result<IntervalStats, LedgerError> {
        if alpha < 2 {
            return Err(LedgerError::AlphaTooSmall { alpha });
        }
        let mut interval_loss = Vec::with_capacity(self.num_levels);
        let mut variance = Vec::with_capacity(self.num_levels);
        let mut reduction_rate = Vec::with_capacity(self.num_levels);
        for level in 0..self.num_levels {
            let loss = self.interval_loss(level, t, alpha)?;
            let var = self.interval_variance(level, t, alpha)?;
            let rate = if t == 1 {
                INITIAL_REDUCTION_RATE
            } else {
                let var_prev = self.interval_variance(level, t - 1, alpha)?;
                variance_reduction_rate(var_prev, var)
            };
            interval_loss.push(loss);
            variance.push(var);
            reduction_rate.push(rate);
        }
        Ok(IntervalStats {
            t,
            interval_loss,
            variance,
            reduction_rate,
        })
    }
}

/// Per-level statistics of one iteration interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    /// Interval index, starting at 1.
    pub t: u64,
    /// Per-level interval losses `L_{i,t}`.
    pub interval_loss: Vec<f64>,
    /// Per-level interval variances `Var_{i,t}`.
    pub variance: Vec<f64>,
    /// Per-level variance reduction rates `r_{i,t}`.
    pub reduction_rate: Vec<f64>,
}

impl IntervalStats {
    pub fn num_levels(&self) -> usize {
        self.interval_loss.len()
    }

    /// Sum of the per-level interval losses.
    pub fn total_interval_loss(&self) -> f64 {
        self.interval_loss.iter().sum()
    }
}

/// Rate of decrease in variance between two consecutive intervals:
/// `(var_prev - var_curr) / (var_prev + eps)`.
pub fn variance_reduction_rate(var_prev: f64, var_curr: f64) -> f64 {
    debug_assert!(var_prev.is_finite() && var_prev >= 0.0);
    debug_assert!(var_curr.is_finite() && var_curr >= 0.0);
    (var_prev - var_curr) / (var_prev + VARIANCE_EPSILON)
}

/// Per-level loss multipliers applied before summation.
///
/// Weights are 1 for unselected levels and `1 + boost` for the selected
/// ones, so every entry is at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// The identity weighting: every level weighted 1.
    pub fn all_ones(num_levels: usize) -> Self {
        WeightVector(vec![1.0; num_levels])
    }

    /// Wraps explicit weights, rejecting entries below 1 or non-finite.
    pub fn new(weights: Vec<f64>) -> Result<Self, LedgerError> {
        for (level, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(LedgerError::NonFiniteLoss {
                    iteration: 0,
                    level,
                });
            }
            if w < 1.0 {
                return Err(LedgerError::NegativeLoss {
                    iteration: 0,
                    level,
                    value: w,
                });
            }
        }
        Ok(WeightVector(weights))
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| w.is_finite() && *w >= 1.0));
        WeightVector(weights)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, level: usize) -> f64 {
        self.0[level]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.clone()
    }

    /// Number of levels weighted strictly above 1.
    pub fn num_boosted(&self) -> usize {
        self.0.iter().filter(|&&w| w > 1.0).count()
    }
}

/// Weighted total `sum_i w_i * L_i`.
pub fn weighted_total(losses: &[f64], weights: &WeightVector) -> Result<f64, LedgerError> {
    if losses.len() != weights.len() {
        return Err(LedgerError::LengthMismatch {
            losses: losses.len(),
            weights: weights.len(),
        });
    }
    Ok(losses
        .iter()
        .zip(weights.as_slice())
        .map(|(&l, &w)| w * l)
        .sum())
}
