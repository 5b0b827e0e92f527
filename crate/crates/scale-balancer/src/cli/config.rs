//! Config file schema and resolution.
//!
//! One JSON schema serves every command; each command reads the fields
//! it needs. Resolution order for any field: built-in default, then the
//! config file, then `--set key=value` overrides. The seed additionally
//! honors `--seed` (strongest) and the `SCALE_BALANCER_SEED` environment
//! variable (fallback before the built-in default), and is always
//! explicit in the resolved config written into artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::CliError;
use crate::policy::{ControllerMode, PolicyParams};
use crate::testbed::{AblationGrid, ProblemSpec, TrainConfig};
use crate::trace_io::ReplayConfig;
use crate::weighting::SelectionConfig;

/// Environment variable consulted when no seed is given anywhere else.
pub const SEED_ENV_VAR: &str = "SCALE_BALANCER_SEED";

/// Seed written into the resolved config when nothing supplies one.
pub const DEFAULT_SEED: u64 = 42;

fn default_total_iterations() -> u64 {
    5000
}
fn default_alpha() -> u64 {
    100
}
fn default_step_size() -> f64 {
    0.005
}
fn default_mode() -> ControllerMode {
    ControllerMode::Rlo
}
fn default_num_selected() -> usize {
    2
}
fn default_lambda_primary() -> f64 {
    1.5
}
fn default_lambda_secondary() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.01
}
fn default_beta_min() -> f64 {
    0.1
}
fn default_beta_max() -> f64 {
    0.9
}
fn default_display_offset() -> i64 {
    3
}

/// The full configuration surface, shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Problem to simulate: a preset name or explicit level specs.
    #[serde(default)]
    pub problem: ProblemSpec,
    /// Master seed; always present after resolution.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_total_iterations")]
    pub total_iterations: u64,
    #[serde(default = "default_alpha")]
    pub alpha: u64,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default = "default_mode")]
    pub mode: ControllerMode,
    #[serde(default = "default_num_selected")]
    pub num_selected: usize,
    #[serde(default = "default_lambda_primary")]
    pub lambda_primary: f64,
    #[serde(default = "default_lambda_secondary")]
    pub lambda_secondary: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta_min")]
    pub beta_min: f64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    /// Overrides every level's observation-noise scale when set.
    #[serde(default)]
    pub noise_scale: Option<f64>,
    /// `[iteration, multiplier]` pairs applied when the iteration starts.
    #[serde(default)]
    pub lr_schedule: Vec<(u64, f64)>,
    /// Offset added to level indices in human-readable output (P3, P4, ...).
    #[serde(default = "default_display_offset")]
    pub display_offset: i64,
    /// Input trace CSV for `replay`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Sweep dimensions for `ablate`.
    #[serde(default)]
    pub grid: Option<AblationGrid>,
}

impl Default for FileConfig {
    fn default() -> Self {
        serde_json::from_value(serde_json::Value::Object(Default::default()))
            .expect("empty object satisfies all defaults")
    }
}

impl FileConfig {
    /// The resolved seed. Panics if resolution was skipped.
    pub fn seed(&self) -> u64 {
        self.seed.expect("seed is filled during config resolution")
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            num_selected: self.num_selected,
            lambda_primary: self.lambda_primary,
            lambda_secondary: self.lambda_secondary,
        }
    }

    pub fn policy_params(&self) -> PolicyParams {
        PolicyParams {
            gamma: self.gamma,
            beta_min: self.beta_min,
            beta_max: self.beta_max,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            total_iterations: self.total_iterations,
            alpha: self.alpha,
            step_size: self.step_size,
            seed: self.seed(),
            mode: self.mode,
            selection: self.selection(),
            policy: self.policy_params(),
            lr_schedule: self.lr_schedule.clone(),
        }
    }

    pub fn replay_config(&self) -> ReplayConfig {
        ReplayConfig {
            alpha: self.alpha,
            mode: self.mode,
            selection: self.selection(),
            policy: self.policy_params(),
        }
    }

    /// Human-facing label for a 0-based level index.
    pub fn level_label(&self, level: usize) -> String {
        format!("P{}", self.display_offset + level as i64)
    }
}

/// Loads and resolves the configuration for one command invocation.
pub fn resolve_config(
    path: Option<&Path>,
    sets: &[String],
    seed_flag: Option<u64>,
) -> Result<FileConfig, CliError> {
    let mut value = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<serde_json::Value>(&text).map_err(|e| {
                CliError::Config(format!("config {} is not valid JSON: {e}", path.display()))
            })?
        }
        None => serde_json::Value::Object(Default::default()),
    };
    let object = value.as_object_mut().ok_or_else(|| {
        CliError::Config("config root must be a JSON object".to_string())
    })?;

    for setting in sets {
        let (key, raw) = setting.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override {setting:?} must look like key=value"))
        })?;
        let parsed = serde_json::from_str::<serde_json::Value>(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        object.insert(key.to_string(), parsed);
    }

    let mut config: FileConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;

    if let Some(seed) = seed_flag {
        config.seed = Some(seed);
    }
    if config.seed.is_none() {
        if let Ok(env_seed) = std::env::var(SEED_ENV_VAR) {
            let parsed = env_seed.parse::<u64>().map_err(|_| {
                CliError::Config(format!(
                    "{SEED_ENV_VAR} must be a 64-bit unsigned integer, got {env_seed:?}"
                ))
            })?;
            config.seed = Some(parsed);
        }
    }
    if config.seed.is_none() {
        config.seed = Some(DEFAULT_SEED);
    }

    if let Some(noise) = config.noise_scale {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(CliError::Config(format!(
                "noise_scale must be non-negative, got {noise}"
            )));
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_an_empty_config() {
        let config = resolve_config(None, &[], None).unwrap();
        assert_eq!(config.seed, Some(DEFAULT_SEED));
        assert_eq!(config.alpha, 100);
        assert_eq!(config.total_iterations, 5000);
        assert_eq!(config.mode, ControllerMode::Rlo);
        assert_eq!(config.problem, ProblemSpec::default());
    }

    #[test]
    fn set_overrides_parse_json_then_fall_back_to_strings() {
        let sets = vec![
            "alpha=50".to_string(),
            "mode=avw".to_string(),
            "problem=imbalanced-5".to_string(),
        ];
        let config = resolve_config(None, &sets, None).unwrap();
        assert_eq!(config.alpha, 50);
        assert_eq!(config.mode, ControllerMode::Avw);
        assert_eq!(config.problem, ProblemSpec::Preset("imbalanced-5".into()));
    }

    #[test]
    fn seed_flag_beats_set_override() {
        let sets = vec!["seed=5".to_string()];
        let config = resolve_config(None, &sets, Some(9)).unwrap();
        assert_eq!(config.seed, Some(9));
        let config = resolve_config(None, &sets, None).unwrap();
        assert_eq!(config.seed, Some(5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let sets = vec!["alhpa=50".to_string()];
        let err = resolve_config(None, &sets, None).unwrap_err();
        assert!(err.to_string().contains("alhpa"));
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let sets = vec!["alpha".to_string()];
        assert!(resolve_config(None, &sets, None).is_err());
    }

    #[test]
    fn level_labels_use_the_display_offset() {
        let config = resolve_config(None, &[], None).unwrap();
        assert_eq!(config.level_label(0), "P3");
        assert_eq!(config.level_label(4), "P7");
    }
}
