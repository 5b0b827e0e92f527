//! Probabilistic action selection and the interval controller.
//!
//! A four-armed policy assigns each weight-update action a selection
//! probability. After every interval the previous action is awarded or
//! punished by the sign of the change in total interval loss: its
//! probability moves by `gamma`, is clamped into `[beta_min, beta_max]`,
//! and the remaining probabilities are rescaled so the four still sum
//! to 1. The controller drives this cycle once per interval boundary and
//! emits a step report suitable for line-delimited JSON output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{IntervalStats, WeightVector, INITIAL_VARIANCE};
use crate::rng::rng_digest;
use crate::weighting::{apply_action, Action, SelectionConfig};

/// Reward reported before any interval has completed.
pub const INITIAL_REWARD: i32 = 0;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("probabilities must sum to 1 within 1e-12, got sum {sum}")]
    BadProbabilitySum { sum: f64 },
    #[error("probability p{index} = {value} is outside (0, 1)")]
    BadProbability { index: usize, value: f64 },
    #[error("bounds must satisfy 0 < beta_min < beta_max < 1, got [{beta_min}, {beta_max}]")]
    BadBounds { beta_min: f64, beta_max: f64 },
    #[error("gamma must be a positive finite value, got {gamma}")]
    BadGamma { gamma: f64 },
    #[error("stats cover {found} levels but the controller expects {expected}")]
    LevelCountMismatch { expected: usize, found: usize },
    #[error("controller expected interval {expected}, got stats for interval {found}")]
    IntervalOutOfSequence { expected: u64, found: u64 },
}

/// Clamp into `[beta_min, beta_max]`: `min(max(x, beta_min), beta_max)`.
pub fn brelu(x: f64, beta_min: f64, beta_max: f64) -> f64 {
    debug_assert!(beta_min < beta_max);
    x.max(beta_min).min(beta_max)
}

/// Tunables for the probability update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Award/punishment step applied to the previous action's probability.
    pub gamma: f64,
    /// Lower clamp for an updated probability.
    pub beta_min: f64,
    /// Upper clamp for an updated probability.
    pub beta_max: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            gamma: 0.01,
            beta_min: 0.1,
            beta_max: 0.9,
        }
    }
}

/// Per-action selection probabilities plus the update tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    probabilities: [f64; Action::COUNT],
    gamma: f64,
    beta_min: f64,
    beta_max: f64,
}

impl Default for Policy {
    /// Uniform probabilities with the default tunables.
    fn default() -> Self {
        Policy::from_params(&PolicyParams::default()).expect("default params are valid")
    }
}

impl Policy {
    /// A validated policy from explicit probabilities.
    pub fn new(
        probabilities: [f64; Action::COUNT],
        params: &PolicyParams,
    ) -> Result<Self, PolicyError> {
        if !(params.gamma.is_finite() && params.gamma > 0.0) {
            return Err(PolicyError::BadGamma { gamma: params.gamma });
        }
        let bounds_ok = params.beta_min.is_finite()
            && params.beta_max.is_finite()
            && 0.0 < params.beta_min
            && params.beta_min < params.beta_max
            && params.beta_max < 1.0;
        if !bounds_ok {
            return Err(PolicyError::BadBounds {
                beta_min: params.beta_min,
                beta_max: params.beta_max,
            });
        }
        for (index, &value) in probabilities.iter().enumerate() {
            if !(value.is_finite() && value > 0.0 && value < 1.0) {
                return Err(PolicyError::BadProbability { index, value });
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PolicyError::BadProbabilitySum { sum });
        }
        Ok(Policy {
            probabilities,
            gamma: params.gamma,
            beta_min: params.beta_min,
            beta_max: params.beta_max,
        })
    }

    /// The uninformed starting point: every action at probability 1/4.
    pub fn from_params(params: &PolicyParams) -> Result<Self, PolicyError> {
        Policy::new([0.25; Action::COUNT], params)
    }

    pub fn probabilities(&self) -> [f64; Action::COUNT] {
        self.probabilities
    }

    pub fn probability(&self, action: Action) -> f64 {
        self.probabilities[action.index()]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    /// Awards or punishes `prev_action` by `reward`'s sign.
    ///
    /// The updated probability moves by `gamma` (up for a positive reward,
    /// down otherwise — a zero reward punishes) and is clamped through
    /// [`brelu`]; the other three are rescaled by
    /// `(1 - p_new) / (1 - p_old)`. Only the updated entry is clamped, so
    /// a rescaled probability may drift below `beta_min`.
    pub fn update(&self, prev_action: Action, reward: i32) -> Policy {
        let k = prev_action.index();
        let old = self.probabilities[k];
        let delta = if reward > 0 { self.gamma } else { -self.gamma };
        let new = brelu(old + delta, self.beta_min, self.beta_max);
        // The rescale denominator 1 - p_old equals the sum of the other
        // probabilities while the simplex invariant holds; using the sum
        // itself keeps rounding drift from compounding across updates.
        let others: f64 = self
            .probabilities
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != k)
            .map(|(_, &p)| p)
            .sum();
        let factor = (1.0 - new) / others;
        let mut probabilities = self.probabilities;
        for (q, p) in probabilities.iter_mut().enumerate() {
            if q != k {
                *p *= factor;
            }
        }
        probabilities[k] = new;
        debug_assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        Policy {
            probabilities,
            ..*self
        }
    }

    /// Maps one uniform draw in `[0, 1)` to an action by inverse CDF over
    /// `a0..a3`.
    pub fn action_for_draw(&self, u: f64) -> Action {
        let mut acc = 0.0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return Action::from_index(k).unwrap();
            }
        }
        Action::ResetToOne
    }
}

/// Samples an action, consuming exactly one uniform draw from `rng`.
pub fn sample_action<R: Rng>(policy: &Policy, rng: &mut R) -> Action {
    let u: f64 = rng.random();
    policy.action_for_draw(u)
}

/// Snapshot of interval statistics for two adjacent intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RloState {
    pub interval_loss_curr: Vec<f64>,
    pub interval_loss_prev: Vec<f64>,
    pub variance_curr: Vec<f64>,
    pub variance_prev: Vec<f64>,
}

impl RloState {
    /// Builds the state for the current interval. Before any previous
    /// interval exists the predecessors default to zero losses and unit
    /// variances ([`INITIAL_VARIANCE`]).
    pub fn from_stats(curr: &IntervalStats, prev: Option<&RloState>) -> RloState {
        let num_levels = curr.num_levels();
        let (interval_loss_prev, variance_prev) = match prev {
            Some(state) => (state.interval_loss_curr.clone(), state.variance_curr.clone()),
            None => (vec![0.0; num_levels], vec![INITIAL_VARIANCE; num_levels]),
        };
        RloState {
            interval_loss_curr: curr.interval_loss.clone(),
            interval_loss_prev,
            variance_curr: curr.variance.clone(),
            variance_prev,
        }
    }

    pub fn num_levels(&self) -> usize {
        self.interval_loss_curr.len()
    }

    /// Sum of the current interval's per-level losses.
    pub fn total_interval_loss(&self) -> f64 {
        self.interval_loss_curr.iter().sum()
    }
}

/// Sign of the drop in total interval loss between two states:
/// `+1` if the total decreased, `0` if unchanged, `-1` if it grew.
pub fn compute_reward(prev: &RloState, curr: &RloState) -> i32 {
    assert_eq!(
        prev.num_levels(),
        curr.num_levels(),
        "reward inputs must cover the same levels"
    );
    let diff = prev.total_interval_loss() - curr.total_interval_loss();
    if diff > 0.0 {
        1
    } else if diff < 0.0 {
        -1
    } else {
        0
    }
}

/// How the controller chooses an action each interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// Sample from the evolving policy.
    Rlo,
    /// Always execute `a0` (variance-guided weighting); the policy is
    /// never consulted or updated.
    Avw,
    /// Always execute one configured action.
    Fixed(Action),
    /// Never act: weights stay at 1 for the whole run.
    Uniform,
}

impl ControllerMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerMode::Rlo => "rlo",
            ControllerMode::Avw => "avw",
            ControllerMode::Fixed(Action::MaxVarianceReduction) => "a0",
            ControllerMode::Fixed(Action::MinIntervalLoss) => "a1",
            ControllerMode::Fixed(Action::MaxIntervalLoss) => "a2",
            ControllerMode::Fixed(Action::ResetToOne) => "a3",
            ControllerMode::Uniform => "uniform",
        }
    }
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rlo" => Ok(ControllerMode::Rlo),
            "avw" => Ok(ControllerMode::Avw),
            "uniform" => Ok(ControllerMode::Uniform),
            other => other
                .parse::<Action>()
                .map(ControllerMode::Fixed)
                .map_err(|_| {
                    format!("unknown mode {other:?}, expected rlo, avw, uniform, or a0..a3")
                }),
        }
    }
}

impl Serialize for ControllerMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ControllerMode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One line of the step-report stream emitted at each interval boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Interval index, starting at 1.
    pub t: u64,
    /// Action executed this interval; `null` in uniform mode.
    pub action: Option<Action>,
    /// Reward granted to the previous action (0 on the first interval).
    pub reward: i32,
    /// Policy snapshot the action was drawn from (post-update).
    pub probabilities: [f64; Action::COUNT],
    /// Weights in effect until the next boundary.
    pub weights: Vec<f64>,
    pub interval_losses: Vec<f64>,
    pub variances: Vec<f64>,
    pub reduction_rates: Vec<f64>,
    /// Digest of the action-sampling rng state after this step.
    pub seed_state_digest: String,
}

/// Sequential per-run state machine executed once per interval boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    num_levels: usize,
    mode: ControllerMode,
    policy: Policy,
    t: u64,
    prev_action: Option<Action>,
    prev_state: Option<RloState>,
    last_reward: i32,
}

impl Controller {
    pub fn new(num_levels: usize, mode: ControllerMode, policy: Policy) -> Controller {
        assert!(num_levels > 0, "controller needs at least one level");
        Controller {
            num_levels,
            mode,
            policy,
            t: 0,
            prev_action: None,
            prev_state: None,
            last_reward: INITIAL_REWARD,
        }
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    /// Intervals processed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn last_reward(&self) -> i32 {
        self.last_reward
    }

    pub fn prev_action(&self) -> Option<Action> {
        self.prev_action
    }

    /// Runs one interval boundary: rewards the previous action, updates
    /// the policy (rlo mode only), selects and executes the next action,
    /// and reports the step.
    ///
    /// Must be called exactly once per boundary, with `stats.t` equal to
    /// the number of boundaries seen so far plus one. Consumes exactly one
    /// uniform draw in rlo mode and none otherwise.
    pub fn step(
        &mut self,
        stats: &IntervalStats,
        selection: &SelectionConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(WeightVector, StepReport), PolicyError> {
        if stats.num_levels() != self.num_levels {
            return Err(PolicyError::LevelCountMismatch {
                expected: self.num_levels,
                found: stats.num_levels(),
            });
        }
        if stats.t != self.t + 1 {
            return Err(PolicyError::IntervalOutOfSequence {
                expected: self.t + 1,
                found: stats.t,
            });
        }

        let state = RloState::from_stats(stats, self.prev_state.as_ref());
        let reward = match self.prev_state.as_ref() {
            Some(prev) => compute_reward(prev, &state),
            None => INITIAL_REWARD,
        };
        if self.mode == ControllerMode::Rlo {
            if let Some(prev_action) = self.prev_action {
                self.policy = self.policy.update(prev_action, reward);
            }
        }

        let action = match self.mode {
            ControllerMode::Rlo => Some(sample_action(&self.policy, rng)),
            ControllerMode::Avw => Some(Action::MaxVarianceReduction),
            ControllerMode::Fixed(fixed) => Some(fixed),
            ControllerMode::Uniform => None,
        };
        let weights = match action {
            Some(action) => apply_action(action, stats, selection),
            None => WeightVector::all_ones(self.num_levels),
        };

        self.t += 1;
        self.prev_state = Some(state);
        self.prev_action = action;
        self.last_reward = reward;

        let report = StepReport {
            t: self.t,
            action,
            reward,
            probabilities: self.policy.probabilities(),
            weights: weights.to_vec(),
            interval_losses: stats.interval_loss.clone(),
            variances: stats.variance.clone(),
            reduction_rates: stats.reduction_rate.clone(),
            seed_state_digest: rng_digest(rng),
        };
        Ok((weights, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::controller_rng;
    use proptest::prelude::*;

    fn stats_for(t: u64, interval_loss: Vec<f64>) -> IntervalStats {
        let n = interval_loss.len();
        IntervalStats {
            t,
            interval_loss,
            variance: vec![0.5; n],
            reduction_rate: vec![0.1; n],
        }
    }

    #[test]
    fn brelu_clamps_both_ends() {
        assert_eq!(brelu(0.05, 0.1, 0.9), 0.1);
        assert_eq!(brelu(0.95, 0.1, 0.9), 0.9);
        assert_eq!(brelu(0.5, 0.1, 0.9), 0.5);
    }

    #[test]
    fn update_awards_the_previous_action() {
        let policy = Policy::default();
        let updated = policy.update(Action::MaxVarianceReduction, 1);
        let p = updated.probabilities();
        assert!((p[0] - 0.26).abs() < 1e-12);
        for &q in &p[1..] {
            assert!((q - 0.25 * (0.74 / 0.75)).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_punishes() {
        let policy = Policy::default();
        let updated = policy.update(Action::MaxVarianceReduction, 0);
        let p = updated.probabilities();
        assert!((p[0] - 0.24).abs() < 1e-12);
        for &q in &p[1..] {
            assert!((q - 0.25 * (0.76 / 0.75)).abs() < 1e-12);
        }
    }

    #[test]
    fn update_clamps_at_the_lower_bound() {
        let params = PolicyParams::default();
        let policy = Policy::new([0.105, 0.295, 0.3, 0.3], &params).unwrap();
        let updated = policy.update(Action::MaxVarianceReduction, -1);
        let p = updated.probabilities();
        assert!((p[0] - 0.1).abs() < 1e-12);
        assert!((p[1] - 0.295 * (0.9 / 0.895)).abs() < 1e-12);
        assert!((p[2] - 0.3 * (0.9 / 0.895)).abs() < 1e-12);
        assert!((p[3] - 0.3 * (0.9 / 0.895)).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_may_push_others_below_beta_min() {
        // Documented consequence of clamping only the updated entry:
        // awarding p2 rescales p0 = 0.101 by 0.39/0.4 to 0.098475.
        let params = PolicyParams::default();
        let policy = Policy::new([0.101, 0.101, 0.6, 0.198], &params).unwrap();
        let updated = policy.update(Action::MaxIntervalLoss, 1);
        let p = updated.probabilities();
        assert!(p[0] < params.beta_min);
        assert!((p[0] - 0.098475).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn policy_rejects_invalid_inputs() {
        let params = PolicyParams::default();
        assert!(matches!(
            Policy::new([0.5, 0.5, 0.25, 0.25], &params),
            Err(PolicyError::BadProbabilitySum { .. })
        ));
        assert!(matches!(
            Policy::new([1.0, 0.0, 0.0, 0.0], &params),
            Err(PolicyError::BadProbability { .. })
        ));
        let bad_bounds = PolicyParams {
            beta_min: 0.9,
            beta_max: 0.1,
            ..Default::default()
        };
        assert!(matches!(
            Policy::from_params(&bad_bounds),
            Err(PolicyError::BadBounds { .. })
        ));
    }

    #[test]
    fn reward_sign_examples() {
        let prev = RloState {
            interval_loss_curr: vec![6.0, 4.0],
            interval_loss_prev: vec![0.0, 0.0],
            variance_curr: vec![0.0, 0.0],
            variance_prev: vec![1.0, 1.0],
        };
        let mut curr = prev.clone();
        curr.interval_loss_curr = vec![5.0, 4.5];
        assert_eq!(compute_reward(&prev, &curr), 1);
        curr.interval_loss_curr = vec![6.0, 4.0];
        assert_eq!(compute_reward(&prev, &curr), 0);
        curr.interval_loss_curr = vec![5.0, 4.5];
        assert_eq!(compute_reward(&curr, &prev), -1);
    }

    #[test]
    fn inverse_cdf_hand_checks() {
        let policy = Policy::default();
        assert_eq!(policy.action_for_draw(0.30), Action::MinIntervalLoss);
        assert_eq!(policy.action_for_draw(0.99), Action::ResetToOne);
        assert_eq!(policy.action_for_draw(0.0), Action::MaxVarianceReduction);

        let delta = 1e-15;
        let spiked = Policy::new(
            [1.0 - 3.0 * delta, delta, delta, delta],
            &PolicyParams::default(),
        )
        .unwrap();
        assert_eq!(spiked.action_for_draw(0.9999), Action::MaxVarianceReduction);
    }

    #[test]
    fn first_step_samples_without_updating() {
        let mut controller = Controller::new(2, ControllerMode::Rlo, Policy::default());
        let mut rng = controller_rng(7);
        let (_, report) = controller
            .step(&stats_for(1, vec![3.0, 2.0]), &SelectionConfig::default(), &mut rng)
            .unwrap();
        assert_eq!(report.t, 1);
        assert_eq!(report.reward, INITIAL_REWARD);
        assert_eq!(report.probabilities, [0.25; 4]);
        assert!(report.action.is_some());
    }

    #[test]
    fn avw_mode_always_runs_a0_and_never_touches_the_policy() {
        let mut controller = Controller::new(2, ControllerMode::Avw, Policy::default());
        let mut rng = controller_rng(7);
        let digest_before = rng_digest(&rng);
        for t in 1..=5 {
            let (_, report) = controller
                .step(
                    &stats_for(t, vec![3.0 / t as f64, 2.0]),
                    &SelectionConfig { num_selected: 1, ..Default::default() },
                    &mut rng,
                )
                .unwrap();
            assert_eq!(report.action, Some(Action::MaxVarianceReduction));
            assert_eq!(report.probabilities, [0.25; 4]);
            assert_eq!(report.seed_state_digest, digest_before);
        }
    }

    #[test]
    fn reward_feeds_the_policy_update_in_rlo_mode() {
        // Total interval loss dropping 30 -> 27 must award the previous
        // action before the next sample.
        let mut controller = Controller::new(1, ControllerMode::Rlo, Policy::default());
        let mut rng = controller_rng(3);
        let (_, first) = controller
            .step(&stats_for(1, vec![30.0]), &SelectionConfig { num_selected: 1, ..Default::default() }, &mut rng)
            .unwrap();
        let chosen = first.action.unwrap();
        let (_, second) = controller
            .step(&stats_for(2, vec![27.0]), &SelectionConfig { num_selected: 1, ..Default::default() }, &mut rng)
            .unwrap();
        assert_eq!(second.reward, 1);
        assert!((second.probabilities[chosen.index()] - 0.26).abs() < 1e-12);
    }

    #[test]
    fn uniform_mode_reports_no_action_and_unit_weights() {
        let mut controller = Controller::new(3, ControllerMode::Uniform, Policy::default());
        let mut rng = controller_rng(7);
        let (weights, report) = controller
            .step(&stats_for(1, vec![1.0, 2.0, 3.0]), &SelectionConfig::default(), &mut rng)
            .unwrap();
        assert_eq!(report.action, None);
        assert_eq!(weights.as_slice(), &[1.0; 3]);
    }

    #[test]
    fn step_rejects_mismatched_stats() {
        let mut controller = Controller::new(3, ControllerMode::Rlo, Policy::default());
        let mut rng = controller_rng(7);
        let err = controller
            .step(&stats_for(1, vec![1.0, 2.0]), &SelectionConfig::default(), &mut rng)
            .unwrap_err();
        assert_eq!(
            err,
            PolicyError::LevelCountMismatch {
                expected: 3,
                found: 2
            }
        );
        let err = controller
            .step(&stats_for(5, vec![1.0, 2.0, 3.0]), &SelectionConfig::default(), &mut rng)
            .unwrap_err();
        assert_eq!(
            err,
            PolicyError::IntervalOutOfSequence {
                expected: 1,
                found: 5
            }
        );
    }

    #[test]
    fn step_report_wire_format_is_stable() {
        let report = StepReport {
            t: 1,
            action: Some(Action::MaxVarianceReduction),
            reward: 0,
            probabilities: [0.25; 4],
            weights: vec![1.5, 1.0],
            interval_losses: vec![3.0, 2.0],
            variances: vec![0.5, 0.5],
            reduction_rates: vec![0.0, 0.0],
            seed_state_digest: "00".to_string(),
        };
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(
            json,
            r#"{"t":1,"action":"a0","reward":0,"probabilities":[0.25,0.25,0.25,0.25],"weights":[1.5,1.0],"interval_losses":[3.0,2.0],"variances":[0.5,0.5],"reduction_rates":[0.0,0.0],"seed_state_digest":"00"}"#
        );
        let back: StepReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);

        let mut uniform_mode = report.clone();
        uniform_mode.action = None;
        let json = serde_json::to_string(&uniform_mode).unwrap();
        assert!(json.contains(r#""action":null"#));
    }

    #[test]
    fn mode_strings_round_trip() {
        for mode in [
            ControllerMode::Rlo,
            ControllerMode::Avw,
            ControllerMode::Uniform,
            ControllerMode::Fixed(Action::MinIntervalLoss),
        ] {
            assert_eq!(mode.as_str().parse::<ControllerMode>().unwrap(), mode);
        }
        assert!("bogus".parse::<ControllerMode>().is_err());
    }

    proptest! {
        #[test]
        fn updates_preserve_the_simplex(
            actions in proptest::collection::vec(0usize..4, 1..200),
            rewards in proptest::collection::vec(-1i32..=1, 1..200)
        ) {
            let mut policy = Policy::default();
            for (&a, &r) in actions.iter().zip(&rewards) {
                policy = policy.update(Action::from_index(a).unwrap(), r);
                let p = policy.probabilities();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                // The just-updated entry obeys the clamp bounds.
                prop_assert!(p[a] >= policy.beta_min() - 1e-15);
                prop_assert!(p[a] <= policy.beta_max() + 1e-15);
                // Everything stays strictly positive.
                for &q in &p {
                    prop_assert!(q > 0.0);
                }
            }
        }

        #[test]
        fn reward_is_antisymmetric(
            a in proptest::collection::vec(0.0f64..100.0, 1..6),
            b in proptest::collection::vec(0.0f64..100.0, 1..6)
        ) {
            let n = a.len().min(b.len());
            let make = |losses: &[f64]| RloState {
                interval_loss_curr: losses.to_vec(),
                interval_loss_prev: vec![0.0; losses.len()],
                variance_curr: vec![0.0; losses.len()],
                variance_prev: vec![1.0; losses.len()],
            };
            let x = make(&a[..n]);
            let y = make(&b[..n]);
            prop_assert_eq!(compute_reward(&x, &y), -compute_reward(&y, &x));
        }

        #[test]
        fn update_moves_in_the_reward_direction(
            probs_seed in 1u64..10_000,
            action_index in 0usize..4,
            reward in -1i32..=1
        ) {
            // A pseudo-random valid policy.
            let mut vals = [0.0f64; 4];
            let mut state = probs_seed;
            for v in vals.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = 0.05 + ((state >> 40) as f64 / (1u64 << 24) as f64) * 0.9;
            }
            let sum: f64 = vals.iter().sum();
            for v in vals.iter_mut() {
                *v /= sum;
            }
            let policy = match Policy::new(vals, &PolicyParams::default()) {
                Ok(p) => p,
                Err(_) => return Ok(()), // normalization edge; skip
            };
            let action = Action::from_index(action_index).unwrap();
            let before = policy.probability(action);
            let after = policy.update(action, reward).probability(action);
            if reward > 0 {
                prop_assert!(after > before || after == policy.beta_max());
            } else {
                prop_assert!(after < before || after == policy.beta_min());
            }
        }
    }
}
