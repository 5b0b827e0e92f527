//! Gradient-descent trainer wired to the interval controller.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ledger::{weighted_total, LossTrace, WeightVector};
use crate::policy::{Controller, ControllerMode, Policy, PolicyParams, StepReport};
use crate::rng::{controller_rng, noise_rng};
use crate::testbed::problem::SyntheticProblem;
use crate::testbed::TestbedError;
use crate::weighting::SelectionConfig;

/// Everything a training run needs besides the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Total iterations `T`. Must cover at least two intervals so at
    /// least one reward is computed.
    pub total_iterations: u64,
    /// Interval length in iterations.
    pub alpha: u64,
    /// Base gradient-descent step size.
    pub step_size: f64,
    /// Master seed; the controller and noise streams derive from it.
    pub seed: u64,
    pub mode: ControllerMode,
    pub selection: SelectionConfig,
    pub policy: PolicyParams,
    /// `(iteration, multiplier)` pairs; the step size is multiplied when
    /// the iteration starts.
    pub lr_schedule: Vec<(u64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_iterations: 5000,
            alpha: 100,
            step_size: 0.005,
            seed: 42,
            mode: ControllerMode::Rlo,
            selection: SelectionConfig::default(),
            policy: PolicyParams::default(),
            lr_schedule: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TestbedError> {
        if self.alpha < 2 {
            return Err(TestbedError::InvalidConfig(format!(
                "alpha must be >= 2 (an interval variance needs two samples), got {}",
                self.alpha
            )));
        }
        if self.total_iterations < 2 * self.alpha {
            return Err(TestbedError::InvalidConfig(format!(
                "total_iterations must be at least 2 * alpha = {} for one reward, got {}",
                2 * self.alpha,
                self.total_iterations
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(TestbedError::InvalidConfig(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        for &(iteration, multiplier) in &self.lr_schedule {
            if iteration == 0 {
                return Err(TestbedError::InvalidConfig(
                    "lr_schedule iterations start at 1".to_string(),
                ));
            }
            if !(multiplier.is_finite() && multiplier > 0.0) {
                return Err(TestbedError::InvalidConfig(format!(
                    "lr_schedule multiplier must be positive, got {multiplier}"
                )));
            }
        }
        Ok(())
    }
}

/// One observed loss value and the weight in effect when it was trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub level: usize,
    pub loss: f64,
    pub weight: f64,
}

/// Complete record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub num_levels: usize,
    pub alpha: u64,
    /// One record per (iteration, level), iteration-major.
    pub records: Vec<IterationRecord>,
    pub step_reports: Vec<StepReport>,
    /// Noise-free per-level losses at the final parameters.
    pub final_per_level_loss: Vec<f64>,
    /// Distance to the known optimum, for levels that have one.
    pub final_param_error: Vec<Option<f64>>,
    /// Sum of `final_per_level_loss`.
    pub final_total_loss: f64,
    /// Sum over all iterations of the unweighted observed total loss.
    pub total_loss_auc: f64,
}

impl RunTrace {
    /// Rebuilds the raw loss stream (what an external log would contain).
    pub fn to_loss_trace(&self) -> LossTrace {
        let mut trace = LossTrace::new(self.num_levels);
        for record in &self.records {
            trace
                .record(record.iteration, record.level, record.loss)
                .expect("run trace records are valid by construction");
        }
        trace
    }

    /// Canonical CSV export: `iteration,level,loss,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,level,loss,weight\n");
        for record in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                record.iteration, record.level, record.loss, record.weight
            ));
        }
        out
    }

    /// How often each action was executed, indexed `a0..a3`.
    pub fn action_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for report in &self.step_reports {
            if let Some(action) = report.action {
                counts[action.index()] += 1;
            }
        }
        counts
    }

    /// Policy snapshot of the last step, or the uniform start if no step
    /// ever ran.
    pub fn final_probabilities(&self) -> [f64; 4] {
        self.step_reports
            .last()
            .map(|r| r.probabilities)
            .unwrap_or([0.25; 4])
    }
}

/// Runs plain gradient descent over the problem's parameter blocks,
/// recording every observed loss and invoking the controller at each
/// interval boundary. Weights scale each level's gradient step.
pub fn train(problem: &SyntheticProblem, config: &TrainConfig) -> Result<RunTrace, TestbedError> {
    config.validate()?;
    let num_levels = problem.num_levels();
    config.selection.validate(num_levels)?;
    let policy = Policy::from_params(&config.policy)?;
    let mut controller = Controller::new(num_levels, config.mode, policy);
    let mut ctrl_rng = controller_rng(config.seed);
    let mut noise = noise_rng(config.seed);

    let mut ledger = LossTrace::new(num_levels);
    let mut weights = WeightVector::all_ones(num_levels);
    let mut params: Vec<Vec<f64>> = problem.initial_params.clone();
    let mut grad_buffers: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut observed = vec![0.0; num_levels];
    let mut step_size = config.step_size;
    let mut schedule: Vec<(u64, f64)> = config.lr_schedule.clone();
    schedule.sort_by_key(|&(iteration, _)| iteration);
    let mut schedule_pos = 0;

    let total = config.total_iterations;
    let mut records = Vec::with_capacity((total as usize).saturating_mul(num_levels));
    let mut step_reports = Vec::with_capacity((total / config.alpha) as usize);
    let mut loss_auc = 0.0;

    for iteration in 1..=total {
        while schedule_pos < schedule.len() && schedule[schedule_pos].0 == iteration {
            step_size *= schedule[schedule_pos].1;
            schedule_pos += 1;
        }

        for (level, (spec, block)) in problem.levels.iter().zip(&params).enumerate() {
            let raw = spec.objective.loss(block);
            if !raw.is_finite() {
                return Err(TestbedError::Diverged { iteration, level });
            }
            let value = if spec.noise_scale > 0.0 {
                let jitter: f64 = noise.sample(StandardNormal);
                (raw + spec.noise_scale * jitter).max(0.0)
            } else {
                raw
            };
            observed[level] = value;
        }
        for (level, &value) in observed.iter().enumerate() {
            ledger.record(iteration, level, value)?;
            records.push(IterationRecord {
                iteration,
                level,
                loss: value,
                weight: weights.get(level),
            });
        }
        let backprop_total = weighted_total(&observed, &weights)?;
        if !backprop_total.is_finite() {
            return Err(TestbedError::Diverged {
                iteration,
                level: 0,
            });
        }
        loss_auc += observed.iter().sum::<f64>();

        for (level, spec) in problem.levels.iter().enumerate() {
            let block = &mut params[level];
            let grad = &mut grad_buffers[level];
            spec.objective.gradient_into(block, grad);
            let scaled_step = step_size * weights.get(level);
            for (p, &g) in block.iter_mut().zip(grad.iter()) {
                *p -= scaled_step * g;
            }
        }

        if iteration % config.alpha == 0 {
            let t = iteration / config.alpha;
            let stats = ledger.interval_stats(t, config.alpha)?;
            let (next_weights, report) =
                controller.step(&stats, &config.selection, &mut ctrl_rng)?;
            weights = next_weights;
            step_reports.push(report);
        }
    }

    let final_per_level_loss: Vec<f64> = problem
        .levels
        .iter()
        .zip(&params)
        .map(|(spec, block)| spec.objective.loss(block))
        .collect();
    let final_param_error: Vec<Option<f64>> = problem
        .levels
        .iter()
        .zip(&params)
        .map(|(spec, block)| {
            spec.objective.optimum().map(|opt| {
                block
                    .iter()
                    .zip(opt)
                    .map(|(&p, &o)| (p - o) * (p - o))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    let final_total_loss = final_per_level_loss.iter().sum();

    Ok(RunTrace {
        num_levels,
        alpha: config.alpha,
        records,
        step_reports,
        final_per_level_loss,
        final_param_error,
        final_total_loss,
        total_loss_auc: loss_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::problem::{make_problem, LevelSpec, ProblemSpec};
    use crate::weighting::Action;

    fn quadratic_problem(curvatures: &[f64]) -> SyntheticProblem {
        let spec = ProblemSpec::Levels(
            curvatures
                .iter()
                .map(|&curvature| LevelSpec::Quadratic {
                    curvature,
                    optimum: vec![0.0, 0.0, 0.0],
                    noise_scale: 0.0,
                })
                .collect(),
        );
        make_problem(&spec, 3).unwrap()
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let config = TrainConfig {
            alpha: 1,
            ..Default::default()
        };
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("alpha must be >= 2"));

        let config = TrainConfig {
            total_iterations: 150,
            ..Default::default()
        };
        assert!(config.validate().unwrap_err().to_string().contains("2 * alpha"));

        let config = TrainConfig {
            step_size: -0.1,
            ..Default::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn single_level_uniform_descent_is_strictly_decreasing() {
        let problem = quadratic_problem(&[1.0]);
        let config = TrainConfig {
            total_iterations: 200,
            alpha: 50,
            step_size: 0.1,
            seed: 1,
            mode: ControllerMode::Uniform,
            selection: SelectionConfig {
                num_selected: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let trace = train(&problem, &config).unwrap();
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        for pair in losses.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn avw_mode_reports_only_a0() {
        let problem = make_problem(&ProblemSpec::default(), 7).unwrap();
        let config = TrainConfig {
            total_iterations: 400,
            alpha: 100,
            mode: ControllerMode::Avw,
            seed: 7,
            ..Default::default()
        };
        let trace = train(&problem, &config).unwrap();
        assert_eq!(trace.step_reports.len(), 4);
        for report in &trace.step_reports {
            assert_eq!(report.action, Some(Action::MaxVarianceReduction));
        }
        assert_eq!(trace.action_counts(), [4, 0, 0, 0]);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let problem = make_problem(&ProblemSpec::default(), 7).unwrap();
        let config = TrainConfig {
            total_iterations: 600,
            alpha: 100,
            mode: ControllerMode::Rlo,
            seed: 9,
            ..Default::default()
        };
        let a = train(&problem, &config).unwrap();
        let b = train(&problem, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lr_schedule_applies_at_the_stated_iteration() {
        // With a huge drop at iteration 3 the parameters barely move
        // afterwards, so consecutive losses become nearly equal.
        let problem = quadratic_problem(&[1.0]);
        let config = TrainConfig {
            total_iterations: 8,
            alpha: 4,
            step_size: 0.5,
            seed: 1,
            mode: ControllerMode::Uniform,
            selection: SelectionConfig {
                num_selected: 1,
                ..Default::default()
            },
            lr_schedule: vec![(3, 1e-9)],
            ..Default::default()
        };
        let trace = train(&problem, &config).unwrap();
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        let drop_before = losses[1] - losses[2];
        let drop_after = losses[2] - losses[3];
        assert!(drop_before > 1e-3);
        assert!(drop_after < 1e-6);
    }

    #[test]
    fn divergence_aborts_with_the_offending_iteration() {
        let problem = quadratic_problem(&[100.0]);
        let config = TrainConfig {
            total_iterations: 400,
            alpha: 100,
            step_size: 0.1, // step * curvature = 10, far past the stability bound
            seed: 1,
            mode: ControllerMode::Uniform,
            selection: SelectionConfig {
                num_selected: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        match train(&problem, &config) {
            Err(TestbedError::Diverged { iteration, .. }) => assert!(iteration > 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn noise_clamps_observed_losses_at_zero() {
        let spec = ProblemSpec::Levels(vec![LevelSpec::Quadratic {
            curvature: 1.0,
            optimum: vec![0.0],
            noise_scale: 10.0,
        }]);
        let problem = make_problem(&spec, 2).unwrap();
        let config = TrainConfig {
            total_iterations: 64,
            alpha: 32,
            step_size: 0.01,
            seed: 5,
            mode: ControllerMode::Uniform,
            selection: SelectionConfig {
                num_selected: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let trace = train(&problem, &config).unwrap();
        assert!(trace.records.iter().all(|r| r.loss >= 0.0));
        assert!(trace.records.iter().any(|r| r.loss == 0.0));
    }
}
