//! Command-line entry points: simulate, replay, ablate, audit.
//!
//! Exit codes are a stable contract: 0 on success, 1 for config or input
//! errors, 2 for numerical divergence, 3 for audit failures. Every
//! artifact directory contains `resolved_config.json`, and every JSON
//! artifact (plus the leading comment line of CSV artifacts) embeds the
//! fully-resolved config, so any output can be reproduced exactly.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::audit::{run_audit, AuditReport};
use crate::testbed::{
    expand_grid, make_problem, run_ablation, train, RunTrace, TestbedError,
};
use crate::trace_io::{parse_trace, replay, serialize_trace, ReplayMetadata};

pub use config::{resolve_config, FileConfig, DEFAULT_SEED, SEED_ENV_VAR};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Divergence(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Divergence(_) => 2,
            CliError::AuditFailed(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "scale-balancer",
    version,
    about = "Dynamic per-level loss weighting: simulate, replay, sweep, and self-check"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandKind,
}

#[derive(Debug, Subcommand)]
enum CommandKind {
    /// Train a synthetic multi-level problem under a controller mode.
    Simulate(RunArgs),
    /// Replay the controller over a recorded loss trace CSV.
    Replay(RunArgs),
    /// Run a paired sweep over modes and hyperparameters.
    Ablate(RunArgs),
    /// Run the seeded numerical self-check suite.
    Audit(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config file; flags and --set override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed (beats config, --set, and the environment).
    #[arg(long)]
    seed: Option<u64>,
    /// Override one top-level config key, e.g. --set alpha=50.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for ablation cells (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        CommandKind::Simulate(args) => cmd_simulate(args),
        CommandKind::Replay(args) => cmd_replay(args),
        CommandKind::Ablate(args) => cmd_ablate(args),
        CommandKind::Audit(args) => cmd_audit(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn map_testbed_error(e: TestbedError) -> CliError {
    match e {
        TestbedError::Diverged { .. } => CliError::Divergence(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("artifact types serialize infallibly")
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("artifact types serialize infallibly");
    out.push('\n');
    out
}

#[derive(Debug, Serialize)]
struct ActionCounts {
    a0: u64,
    a1: u64,
    a2: u64,
    a3: u64,
}

impl From<[u64; 4]> for ActionCounts {
    fn from(counts: [u64; 4]) -> Self {
        ActionCounts {
            a0: counts[0],
            a1: counts[1],
            a2: counts[2],
            a3: counts[3],
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    final_total_loss: f64,
    per_level_final_loss: &'a [f64],
    final_param_error: &'a [Option<f64>],
    action_counts: ActionCounts,
    final_probabilities: [f64; 4],
    config: &'a FileConfig,
}

#[derive(Debug, Serialize)]
struct StreamHeader<'a> {
    config: &'a FileConfig,
}

/// Writes the artifact set for one training run into `dir`.
fn write_run_artifacts(dir: &Path, config: &FileConfig, trace: &RunTrace) -> Result<(), CliError> {
    let compact = to_json(config);
    write_file(&dir.join("resolved_config.json"), &to_pretty_json(config))?;

    let mut run_csv = format!("# config={compact}\n");
    run_csv.push_str(&trace.to_csv());
    write_file(&dir.join("run_trace.csv"), &run_csv)?;

    // Replayable loss log in the canonical trace format (its format
    // forbids comment lines, so the config lives in the sibling files).
    write_file(&dir.join("losses.csv"), &serialize_trace(&trace.to_loss_trace()))?;

    let mut stream = String::new();
    stream.push_str(&to_json(&StreamHeader { config }));
    stream.push('\n');
    for report in &trace.step_reports {
        stream.push_str(&to_json(report));
        stream.push('\n');
    }
    write_file(&dir.join("step_reports.jsonl"), &stream)?;

    let summary = RunSummary {
        final_total_loss: trace.final_total_loss,
        per_level_final_loss: &trace.final_per_level_loss,
        final_param_error: &trace.final_param_error,
        action_counts: trace.action_counts().into(),
        final_probabilities: trace.final_probabilities(),
        config,
    };
    write_file(&dir.join("summary.json"), &to_pretty_json(&summary))
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(args.config.as_deref(), &args.set, args.seed)?;
    let train_config = config.train_config();
    train_config.validate().map_err(map_testbed_error)?;

    let mut problem = make_problem(&config.problem, config.seed()).map_err(map_testbed_error)?;
    if let Some(noise) = config.noise_scale {
        problem = problem.with_noise_scale(noise);
    }
    config
        .selection()
        .validate(problem.num_levels())
        .map_err(|e| CliError::Config(e.to_string()))?;

    let trace = train(&problem, &train_config).map_err(map_testbed_error)?;
    write_run_artifacts(&args.out, &config, &trace)?;

    println!(
        "simulate: mode={} seed={} iterations={} intervals={}",
        config.mode,
        config.seed(),
        config.total_iterations,
        trace.step_reports.len()
    );
    for (level, loss) in trace.final_per_level_loss.iter().enumerate() {
        println!("  {} final loss {loss:.6e}", config.level_label(level));
    }
    println!("  total final loss {:.6e}", trace.final_total_loss);
    println!("  artifacts in {}", args.out.display());
    Ok(())
}

fn cmd_replay(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(args.config.as_deref(), &args.set, args.seed)?;
    let input = config.input.clone().ok_or_else(|| {
        CliError::Config(
            "replay requires an input trace: set \"input\" in the config or pass --set input=PATH"
                .to_string(),
        )
    })?;
    let bytes = std::fs::read(&input)
        .map_err(|e| CliError::Input(format!("cannot read trace {}: {e}", input.display())))?;
    let trace = parse_trace(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;

    let replay_config = config.replay_config();
    let reports = replay(&trace, &replay_config, config.seed())
        .map_err(|e| CliError::Input(e.to_string()))?;
    let metadata = ReplayMetadata::new(&replay_config, config.seed(), trace.num_levels());

    write_file(&args.out.join("resolved_config.json"), &to_pretty_json(&config))?;
    let mut stream = String::new();
    stream.push_str(&to_json(&metadata));
    stream.push('\n');
    for report in &reports {
        stream.push_str(&to_json(report));
        stream.push('\n');
    }
    write_file(&args.out.join("step_reports.jsonl"), &stream)?;

    println!(
        "replay: {} intervals over {} levels (counterfactual weights), artifacts in {}",
        reports.len(),
        trace.num_levels(),
        args.out.display()
    );
    Ok(())
}

fn cmd_ablate(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(args.config.as_deref(), &args.set, args.seed)?;
    let grid = config
        .grid
        .clone()
        .filter(|g| !g.is_empty())
        .ok_or_else(|| {
            CliError::Config(
                "ablate requires a non-empty \"grid\" with modes, alphas, or num_selected"
                    .to_string(),
            )
        })?;

    let base = config.train_config();
    // Cells validate their own configs; only the grid shape is checked here.
    let cells = expand_grid(&grid, &base).map_err(map_testbed_error)?;
    let mut problem = make_problem(&config.problem, config.seed()).map_err(map_testbed_error)?;
    if let Some(noise) = config.noise_scale {
        problem = problem.with_noise_scale(noise);
    }

    let workers = args
        .workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1);
    let run = run_ablation(&problem, &base, &grid, workers).map_err(map_testbed_error)?;

    write_file(&args.out.join("resolved_config.json"), &to_pretty_json(&config))?;
    let mut summary_csv = format!("# config={}\n", to_json(&config));
    summary_csv.push_str(&run.report.to_csv());
    write_file(&args.out.join("ablation_summary.csv"), &summary_csv)?;

    for (cell, outcome) in cells.iter().zip(&run.outcomes) {
        let cell_dir = args.out.join("cells").join(&cell.label);
        let mut cell_config = config.clone();
        cell_config.mode = cell.mode;
        cell_config.alpha = cell.alpha;
        cell_config.num_selected = cell.num_selected;
        cell_config.grid = None;
        match outcome {
            Ok(trace) => write_run_artifacts(&cell_dir, &cell_config, trace)?,
            Err(message) => {
                write_file(&cell_dir.join("resolved_config.json"), &to_pretty_json(&cell_config))?;
                write_file(&cell_dir.join("error.txt"), &format!("{message}\n"))?;
            }
        }
    }

    println!("ablate: {} cells, artifacts in {}", cells.len(), args.out.display());
    for outcome in &run.report.cells {
        match outcome.final_total_loss {
            Some(loss) => println!("  {:<18} final total loss {loss:.6e}", outcome.label),
            None => println!("  {:<18} FAILED: {}", outcome.label, outcome.status),
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AuditArtifact<'a> {
    #[serde(flatten)]
    report: &'a AuditReport,
    config: &'a FileConfig,
}

fn cmd_audit(args: &RunArgs) -> Result<(), CliError> {
    let config = resolve_config(args.config.as_deref(), &args.set, args.seed)?;
    let report = run_audit(config.seed());

    write_file(
        &args.out.join("audit_report.json"),
        &to_pretty_json(&AuditArtifact {
            report: &report,
            config: &config,
        }),
    )?;

    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {} — {}", check.name, check.details);
    }
    if report.all_passed {
        println!("audit: all {} properties hold (seed {})", report.checks.len(), report.seed);
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::AuditFailed(failed.join(", ")))
    }
}
