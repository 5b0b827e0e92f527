//! Synthetic multi-level optimization problems.
//!
//! Each level owns a disjoint parameter block and an independent
//! objective, so weighting a level's loss scales exactly that level's
//! gradient. This isolates the weighting mechanism under test — real
//! multi-scale models couple levels through a shared backbone.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::problem_rng;
use crate::testbed::TestbedError;

/// Name of the built-in five-level quadratic preset.
pub const IMBALANCED_5: &str = "imbalanced-5";

/// Curvatures of the preset levels: two orders of magnitude apart, so the
/// first level starts with the largest loss and tightest descent.
const IMBALANCED_5_CURVATURES: [f64; 5] = [
    10.0,
    3.1622776601683795,
    1.0,
    0.31622776601683794,
    0.1,
];
const IMBALANCED_5_DIM: usize = 4;

/// A per-level objective over one parameter block.
#[derive(Debug, Clone)]
pub enum Objective {
    /// `0.5 * curvature * |params - optimum|^2`.
    Quadratic { curvature: f64, optimum: Vec<f64> },
    /// Mean squared error of a two-layer tanh network against a fixed
    /// teacher-generated dataset.
    TwoLayerRegression(MlpObjective),
}

/// Fixed regression dataset plus network dimensions.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub num_samples: usize,
    /// Row-major `num_samples x input_dim`.
    inputs: Vec<f64>,
    /// Row-major `num_samples x output_dim`.
    targets: Vec<f64>,
}

impl MlpObjective {
    fn param_len(&self) -> usize {
        self.hidden_dim * self.input_dim + self.output_dim * self.hidden_dim
    }

    fn split<'p>(&self, params: &'p [f64]) -> (&'p [f64], &'p [f64]) {
        params.split_at(self.hidden_dim * self.input_dim)
    }

    fn forward(&self, w1: &[f64], w2: &[f64], x: &[f64], hidden: &mut [f64], out: &mut [f64]) {
        for h in 0..self.hidden_dim {
            let row = &w1[h * self.input_dim..(h + 1) * self.input_dim];
            let z: f64 = row.iter().zip(x).map(|(&w, &v)| w * v).sum();
            hidden[h] = z.tanh();
        }
        for o in 0..self.output_dim {
            let row = &w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            out[o] = row.iter().zip(hidden.iter()).map(|(&w, &a)| w * a).sum();
        }
    }

    fn loss(&self, params: &[f64]) -> f64 {
        let (w1, w2) = self.split(params);
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        let mut total = 0.0;
        for s in 0..self.num_samples {
            let x = &self.inputs[s * self.input_dim..(s + 1) * self.input_dim];
            let y = &self.targets[s * self.output_dim..(s + 1) * self.output_dim];
            self.forward(w1, w2, x, &mut hidden, &mut out);
            total += out
                .iter()
                .zip(y)
                .map(|(&p, &t)| (p - t) * (p - t))
                .sum::<f64>();
        }
        total / (2.0 * self.num_samples as f64)
    }

    fn gradient_into(&self, params: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let (w1, w2) = self.split(params);
        let w1_len = self.hidden_dim * self.input_dim;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut out = vec![0.0; self.output_dim];
        let inv_n = 1.0 / self.num_samples as f64;
        for s in 0..self.num_samples {
            let x = &self.inputs[s * self.input_dim..(s + 1) * self.input_dim];
            let y = &self.targets[s * self.output_dim..(s + 1) * self.output_dim];
            self.forward(w1, w2, x, &mut hidden, &mut out);
            // d loss / d out = (out - y) / n
            for o in 0..self.output_dim {
                let e = (out[o] - y[o]) * inv_n;
                for h in 0..self.hidden_dim {
                    grad[w1_len + o * self.hidden_dim + h] += e * hidden[h];
                }
            }
            for h in 0..self.hidden_dim {
                let mut da = 0.0;
                for o in 0..self.output_dim {
                    da += w2[o * self.hidden_dim + h] * (out[o] - y[o]) * inv_n;
                }
                let dz = da * (1.0 - hidden[h] * hidden[h]);
                for d in 0..self.input_dim {
                    grad[h * self.input_dim + d] += dz * x[d];
                }
            }
        }
    }
}

impl Objective {
    pub fn param_len(&self) -> usize {
        match self {
            Objective::Quadratic { optimum, .. } => optimum.len(),
            Objective::TwoLayerRegression(mlp) => mlp.param_len(),
        }
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        match self {
            Objective::Quadratic { curvature, optimum } => {
                let sq: f64 = params
                    .iter()
                    .zip(optimum)
                    .map(|(&p, &o)| (p - o) * (p - o))
                    .sum();
                0.5 * curvature * sq
            }
            Objective::TwoLayerRegression(mlp) => mlp.loss(params),
        }
    }

    pub fn gradient_into(&self, params: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(params.len(), grad.len());
        match self {
            Objective::Quadratic { curvature, optimum } => {
                for ((g, &p), &o) in grad.iter_mut().zip(params).zip(optimum) {
                    *g = curvature * (p - o);
                }
            }
            Objective::TwoLayerRegression(mlp) => mlp.gradient_into(params, grad),
        }
    }

    /// Known minimizer, where one exists in closed form.
    pub fn optimum(&self) -> Option<&[f64]> {
        match self {
            Objective::Quadratic { optimum, .. } => Some(optimum),
            Objective::TwoLayerRegression(_) => None,
        }
    }
}

/// One level: its objective plus the noise added to observed loss values.
#[derive(Debug, Clone)]
pub struct Level {
    pub objective: Objective,
    /// Standard deviation of the Gaussian jitter added to each observed
    /// loss value (the gradient stays exact). Zero means deterministic.
    pub noise_scale: f64,
}

/// A fully instantiated multi-level problem.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub levels: Vec<Level>,
    /// One independent parameter block per level.
    pub initial_params: Vec<Vec<f64>>,
}

impl SyntheticProblem {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Noise-free losses at the initial parameters.
    pub fn initial_losses(&self) -> Vec<f64> {
        self.levels
            .iter()
            .zip(&self.initial_params)
            .map(|(level, params)| level.objective.loss(params))
            .collect()
    }

    /// Replaces every level's noise scale.
    pub fn with_noise_scale(mut self, noise_scale: f64) -> Self {
        for level in &mut self.levels {
            level.noise_scale = noise_scale;
        }
        self
    }
}

/// Declarative problem description; either a named preset or an explicit
/// list of level objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Preset(String),
    Levels(Vec<LevelSpec>),
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Preset(IMBALANCED_5.to_string())
    }
}

/// Declarative description of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelSpec {
    Quadratic {
        curvature: f64,
        optimum: Vec<f64>,
        #[serde(default)]
        noise_scale: f64,
    },
    TwoLayerRegression {
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        #[serde(default = "default_num_samples")]
        num_samples: usize,
        target_seed: u64,
        #[serde(default)]
        noise_scale: f64,
    },
}

fn default_num_samples() -> usize {
    32
}

/// A unit vector drawn from the rng's Gaussian stream.
fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-9 {
        v.fill(0.0);
        v[0] = 1.0;
        return v;
    }
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn build_mlp(
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    num_samples: usize,
    target_seed: u64,
) -> MlpObjective {
    let mut teacher_rng = ChaCha8Rng::seed_from_u64(target_seed);
    let scale_1 = 1.0 / (input_dim as f64).sqrt();
    let scale_2 = 1.0 / (hidden_dim as f64).sqrt();
    let teacher_w1: Vec<f64> = (0..hidden_dim * input_dim)
        .map(|_| teacher_rng.sample::<f64, _>(StandardNormal) * scale_1)
        .collect();
    let teacher_w2: Vec<f64> = (0..output_dim * hidden_dim)
        .map(|_| teacher_rng.sample::<f64, _>(StandardNormal) * scale_2)
        .collect();
    let inputs: Vec<f64> = (0..num_samples * input_dim)
        .map(|_| teacher_rng.sample(StandardNormal))
        .collect();
    let mut targets = vec![0.0; num_samples * output_dim];
    let mut hidden = vec![0.0; hidden_dim];
    for s in 0..num_samples {
        let x = &inputs[s * input_dim..(s + 1) * input_dim];
        for h in 0..hidden_dim {
            let row = &teacher_w1[h * input_dim..(h + 1) * input_dim];
            let z: f64 = row.iter().zip(x).map(|(&w, &v)| w * v).sum();
            hidden[h] = z.tanh();
        }
        for o in 0..output_dim {
            let row = &teacher_w2[o * hidden_dim..(o + 1) * hidden_dim];
            targets[s * output_dim + o] =
                row.iter().zip(hidden.iter()).map(|(&w, &a)| w * a).sum();
        }
    }
    MlpObjective {
        input_dim,
        hidden_dim,
        output_dim,
        num_samples,
        inputs,
        targets,
    }
}

/// Instantiates a problem from its spec. The same (spec, seed) pair
/// always yields an identical problem.
pub fn make_problem(spec: &ProblemSpec, seed: u64) -> Result<SyntheticProblem, TestbedError> {
    let mut rng = problem_rng(seed);
    match spec {
        ProblemSpec::Preset(name) if name == IMBALANCED_5 => {
            let mut levels = Vec::with_capacity(IMBALANCED_5_CURVATURES.len());
            let mut initial_params = Vec::with_capacity(IMBALANCED_5_CURVATURES.len());
            for &curvature in &IMBALANCED_5_CURVATURES {
                let optimum: Vec<f64> = (0..IMBALANCED_5_DIM)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                // Start at distance exactly 1 from the optimum, so the
                // initial losses are curvature/2 and strictly descending
                // across levels regardless of the seed.
                let direction = unit_direction(&mut rng, IMBALANCED_5_DIM);
                let init: Vec<f64> = optimum
                    .iter()
                    .zip(&direction)
                    .map(|(&o, &d)| o + d)
                    .collect();
                levels.push(Level {
                    objective: Objective::Quadratic { curvature, optimum },
                    noise_scale: 0.0,
                });
                initial_params.push(init);
            }
            Ok(SyntheticProblem {
                levels,
                initial_params,
            })
        }
        ProblemSpec::Preset(name) => Err(TestbedError::UnknownPreset(name.clone())),
        ProblemSpec::Levels(specs) => {
            if specs.is_empty() {
                return Err(TestbedError::InvalidProblem(
                    "a problem needs at least one level".to_string(),
                ));
            }
            let mut levels = Vec::with_capacity(specs.len());
            let mut initial_params = Vec::with_capacity(specs.len());
            for (index, level_spec) in specs.iter().enumerate() {
                match level_spec {
                    LevelSpec::Quadratic {
                        curvature,
                        optimum,
                        noise_scale,
                    } => {
                        if !(curvature.is_finite() && *curvature > 0.0) {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: curvature must be positive, got {curvature}"
                            )));
                        }
                        if optimum.is_empty() || optimum.iter().any(|v| !v.is_finite()) {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: optimum must be a non-empty finite vector"
                            )));
                        }
                        if !(noise_scale.is_finite() && *noise_scale >= 0.0) {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: noise_scale must be non-negative"
                            )));
                        }
                        let direction = unit_direction(&mut rng, optimum.len());
                        let init: Vec<f64> = optimum
                            .iter()
                            .zip(&direction)
                            .map(|(&o, &d)| o + d)
                            .collect();
                        levels.push(Level {
                            objective: Objective::Quadratic {
                                curvature: *curvature,
                                optimum: optimum.clone(),
                            },
                            noise_scale: *noise_scale,
                        });
                        initial_params.push(init);
                    }
                    LevelSpec::TwoLayerRegression {
                        input_dim,
                        hidden_dim,
                        output_dim,
                        num_samples,
                        target_seed,
                        noise_scale,
                    } => {
                        if *input_dim == 0 || *hidden_dim == 0 || *output_dim == 0 {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: network dimensions must be positive"
                            )));
                        }
                        if *num_samples == 0 {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: num_samples must be positive"
                            )));
                        }
                        if !(noise_scale.is_finite() && *noise_scale >= 0.0) {
                            return Err(TestbedError::InvalidProblem(format!(
                                "level {index}: noise_scale must be non-negative"
                            )));
                        }
                        let mlp = build_mlp(
                            *input_dim,
                            *hidden_dim,
                            *output_dim,
                            *num_samples,
                            *target_seed,
                        );
                        let scale_1 = 1.0 / (*input_dim as f64).sqrt();
                        let scale_2 = 1.0 / (*hidden_dim as f64).sqrt();
                        let w1_len = hidden_dim * input_dim;
                        let init: Vec<f64> = (0..mlp.param_len())
                            .map(|i| {
                                let scale = if i < w1_len { scale_1 } else { scale_2 };
                                rng.sample::<f64, _>(StandardNormal) * scale
                            })
                            .collect();
                        levels.push(Level {
                            objective: Objective::TwoLayerRegression(mlp),
                            noise_scale: *noise_scale,
                        });
                        initial_params.push(init);
                    }
                }
            }
            Ok(SyntheticProblem {
                levels,
                initial_params,
            })
        }
    }
}
