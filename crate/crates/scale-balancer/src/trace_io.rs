//! Loss-log ingestion and offline controller replay.
//!
//! The input contract is a UTF-8 CSV with the exact header
//! `iteration,level,loss`, rows sorted by iteration then level, and a
//! contiguous level range (levels are normalized to start at 0 on
//! ingestion). Replay runs the controller over such a recorded stream
//! exactly as an online run would, with the caveat that the emitted
//! weights are counterfactual: they cannot influence the pre-recorded
//! losses, and the output metadata says so.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{LedgerError, LossTrace};
use crate::policy::{Controller, ControllerMode, Policy, PolicyError, PolicyParams, StepReport};
use crate::rng::controller_rng;
use crate::weighting::{SelectionConfig, WeightingError};

/// Required header of an external trace file.
pub const TRACE_HEADER: &str = "iteration,level,loss";

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("trace is not valid UTF-8")]
    InvalidUtf8,
    #[error("line 1: malformed header {found:?}, expected {TRACE_HEADER:?}")]
    MalformedHeader { found: String },
    #[error("line {line}: expected 3 comma-separated fields, found {found}")]
    WrongFieldCount { line: usize, found: usize },
    #[error("line {line}: invalid iteration {value:?} (positive integer required)")]
    InvalidIteration { line: usize, value: String },
    #[error("line {line}: invalid level {value:?}")]
    InvalidLevel { line: usize, value: String },
    #[error("line {line}: invalid loss {value:?}")]
    InvalidLoss { line: usize, value: String },
    #[error("line {line}: negative loss {value}")]
    NegativeLoss { line: usize, value: f64 },
    #[error("line {line}: non-finite loss")]
    NonFiniteLoss { line: usize },
    #[error("line {line}: rows must be sorted by iteration then level")]
    NotSorted { line: usize },
    #[error("line {line}: duplicate record for iteration {iteration}, level {level}")]
    DuplicateRecord {
        line: usize,
        iteration: u64,
        level: i64,
    },
    #[error("levels are not contiguous: level {missing} is absent from the trace")]
    NonContiguousLevels { missing: i64 },
    #[error("trace contains no data rows")]
    NoRecords,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error(
        "trace too short: every level needs iterations 1..={required} \
         (2 * alpha), but only 1..={available} are complete"
    )]
    TraceTooShort { required: u64, available: u64 },
    #[error("invalid replay config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Weighting(#[from] WeightingError),
}

/// Parses an external trace file into a validated loss stream with
/// 0-based level indices.
pub fn parse_trace(bytes: &[u8]) -> Result<LossTrace, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ParseError::InvalidUtf8)?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.trim_end_matches('\r'),
        None => {
            return Err(ParseError::MalformedHeader {
                found: String::new(),
            })
        }
    };
    if header != TRACE_HEADER {
        return Err(ParseError::MalformedHeader {
            found: header.to_string(),
        });
    }

    let mut rows: Vec<(u64, i64, f64)> = Vec::new();
    let mut prev_key: Option<(u64, i64)> = None;
    let mut min_level = i64::MAX;
    let mut max_level = i64::MIN;
    for (index, raw_line) in lines {
        let line_number = index + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(ParseError::WrongFieldCount {
                line: line_number,
                found: fields.len(),
            });
        }
        let iteration: u64 = fields[0].parse().map_err(|_| ParseError::InvalidIteration {
            line: line_number,
            value: fields[0].to_string(),
        })?;
        if iteration == 0 {
            return Err(ParseError::InvalidIteration {
                line: line_number,
                value: fields[0].to_string(),
            });
        }
        let level: i64 = fields[1].parse().map_err(|_| ParseError::InvalidLevel {
            line: line_number,
            value: fields[1].to_string(),
        })?;
        let loss: f64 = fields[2].parse().map_err(|_| ParseError::InvalidLoss {
            line: line_number,
            value: fields[2].to_string(),
        })?;
        if !loss.is_finite() {
            return Err(ParseError::NonFiniteLoss { line: line_number });
        }
        if loss < 0.0 {
            return Err(ParseError::NegativeLoss {
                line: line_number,
                value: loss,
            });
        }
        let key = (iteration, level);
        if let Some(prev) = prev_key {
            if key == prev {
                return Err(ParseError::DuplicateRecord {
                    line: line_number,
                    iteration,
                    level,
                });
            }
            if key < prev {
                return Err(ParseError::NotSorted { line: line_number });
            }
        }
        prev_key = Some(key);
        min_level = min_level.min(level);
        max_level = max_level.max(level);
        rows.push((iteration, level, loss));
    }

    if rows.is_empty() {
        return Err(ParseError::NoRecords);
    }

    let num_levels = (max_level - min_level + 1) as usize;
    let mut seen = vec![false; num_levels];
    for &(_, level, _) in &rows {
        seen[(level - min_level) as usize] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(ParseError::NonContiguousLevels {
            missing: min_level + missing as i64,
        });
    }

    let mut trace = LossTrace::new(num_levels);
    for (iteration, level, loss) in rows {
        trace.record(iteration, (level - min_level) as usize, loss)?;
    }
    Ok(trace)
}

/// Canonical serialization: exact header, 0-based levels, rows sorted by
/// iteration then level, shortest round-trip float form, `\n` endings.
/// `serialize_trace(parse_trace(f))` is byte-identical for files already
/// in this form.
pub fn serialize_trace(trace: &LossTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 16 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (iteration, level, loss) in trace.records() {
        out.push_str(&format!("{iteration},{level},{loss}\n"));
    }
    out
}

/// Controller configuration for a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub alpha: u64,
    pub mode: ControllerMode,
    pub selection: SelectionConfig,
    pub policy: PolicyParams,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            alpha: 100,
            mode: ControllerMode::Rlo,
            selection: SelectionConfig::default(),
            policy: PolicyParams::default(),
        }
    }
}

/// Header object written before the step-report stream of a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMetadata {
    pub alpha: u64,
    pub mode: ControllerMode,
    pub seed: u64,
    pub num_levels: usize,
    /// Always true: replayed weights cannot influence the recorded
    /// losses that follow them.
    pub counterfactual: bool,
}

impl ReplayMetadata {
    pub fn new(config: &ReplayConfig, seed: u64, num_levels: usize) -> Self {
        ReplayMetadata {
            alpha: config.alpha,
            mode: config.mode,
            seed,
            num_levels,
            counterfactual: true,
        }
    }
}

/// Replays the controller over a recorded loss stream, producing the
/// same step reports an online run over those losses would emit.
pub fn replay(
    trace: &LossTrace,
    config: &ReplayConfig,
    seed: u64,
) -> Result<Vec<StepReport>, ReplayError> {
    if config.alpha < 2 {
        return Err(ReplayError::InvalidConfig(format!(
            "alpha must be >= 2, got {}",
            config.alpha
        )));
    }
    let num_levels = trace.num_levels();
    config.selection.validate(num_levels)?;
    let available = (0..num_levels)
        .map(|level| trace.contiguous_len(level))
        .min()
        .unwrap_or(0);
    let required = 2 * config.alpha;
    if available < required {
        return Err(ReplayError::TraceTooShort {
            required,
            available,
        });
    }

    let policy = Policy::from_params(&config.policy)?;
    let mut controller = Controller::new(num_levels, config.mode, policy);
    let mut rng = controller_rng(seed);
    let num_intervals = available / config.alpha;
    let mut reports = Vec::with_capacity(num_intervals as usize);
    for t in 1..=num_intervals {
        let stats = trace.interval_stats(t, config.alpha)?;
        let (_, report) = controller.step(&stats, &config.selection, &mut rng)?;
        reports.push(report);
    }
    Ok(reports)
}

/// A replay plus where its input came from; convenience for the CLI.
#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub input: PathBuf,
    pub metadata: ReplayMetadata,
    pub reports: Vec<StepReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file_parses_and_normalizes_levels() {
        let trace = parse_trace(b"iteration,level,loss\n1,3,0.5\n1,4,0.4\n").unwrap();
        assert_eq!(trace.num_levels(), 2);
        assert_eq!(trace.len(), 2);
        assert_eq!(
            trace.records(),
            vec![(1, 0, 0.5), (1, 1, 0.4)]
        );
    }

    #[test]
    fn malformed_header_is_rejected() {
        let err = parse_trace(b"iter,lvl,loss\n1,0,0.5\n").unwrap_err();
        assert!(matches!(err, ParseError::MalformedHeader { .. }));
    }

    #[test]
    fn negative_loss_is_rejected_with_line_number() {
        let err = parse_trace(b"iteration,level,loss\n1,3,-0.5\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::NegativeLoss {
                line: 2,
                value: -0.5
            }
        );
    }

    #[test]
    fn bad_fields_are_rejected_with_line_numbers() {
        assert!(matches!(
            parse_trace(b"iteration,level,loss\nx,0,0.5\n").unwrap_err(),
            ParseError::InvalidIteration { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace(b"iteration,level,loss\n0,0,0.5\n").unwrap_err(),
            ParseError::InvalidIteration { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace(b"iteration,level,loss\n1,zero,0.5\n").unwrap_err(),
            ParseError::InvalidLevel { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace(b"iteration,level,loss\n1,0,abc\n").unwrap_err(),
            ParseError::InvalidLoss { line: 2, .. }
        ));
        assert!(matches!(
            parse_trace(b"iteration,level,loss\n1,0\n").unwrap_err(),
            ParseError::WrongFieldCount { line: 2, found: 2 }
        ));
        assert!(matches!(
            parse_trace(b"iteration,level,loss\n1,0,nan\n").unwrap_err(),
            ParseError::NonFiniteLoss { line: 2 }
        ));
    }

    #[test]
    fn duplicates_and_disorder_are_rejected() {
        assert_eq!(
            parse_trace(b"iteration,level,loss\n1,0,0.5\n1,0,0.5\n").unwrap_err(),
            ParseError::DuplicateRecord {
                line: 3,
                iteration: 1,
                level: 0
            }
        );
        assert_eq!(
            parse_trace(b"iteration,level,loss\n2,0,0.5\n1,0,0.5\n").unwrap_err(),
            ParseError::NotSorted { line: 3 }
        );
    }

    #[test]
    fn non_contiguous_levels_are_rejected() {
        let err = parse_trace(b"iteration,level,loss\n1,3,0.5\n1,5,0.4\n").unwrap_err();
        assert_eq!(err, ParseError::NonContiguousLevels { missing: 4 });
    }

    #[test]
    fn scientific_notation_is_accepted() {
        let trace = parse_trace(b"iteration,level,loss\n1,0,1e-3\n2,0,2.5E2\n").unwrap();
        assert_eq!(trace.records(), vec![(1, 0, 0.001), (2, 0, 250.0)]);
    }

    fn constant_trace_csv(levels: usize, iterations: u64, value: f64) -> String {
        let mut out = String::from("iteration,level,loss\n");
        for m in 1..=iterations {
            for level in 0..levels {
                out.push_str(&format!("{m},{level},{value}\n"));
            }
        }
        out
    }

    #[test]
    fn constant_trace_replay_punishes_every_action() {
        let csv = constant_trace_csv(2, 12, 0.5);
        let trace = parse_trace(csv.as_bytes()).unwrap();
        let config = ReplayConfig {
            alpha: 2,
            ..Default::default()
        };
        let reports = replay(&trace, &config, 7).unwrap();
        assert_eq!(reports.len(), 6);
        assert_eq!(reports[0].reward, 0);
        for report in &reports[1..] {
            assert_eq!(report.reward, 0); // sign(0) -> punish branch
        }
        // Every probability an update touched stayed within the clamp bounds.
        for pair in reports.windows(2) {
            let prev_action = pair[0].action.unwrap();
            let updated = pair[1].probabilities[prev_action.index()];
            assert!((0.1..=0.9).contains(&updated));
            // Punished: strictly below its pre-update value unless clamped.
            let before = pair[0].probabilities[prev_action.index()];
            assert!(updated < before || updated == 0.1);
        }
    }

    #[test]
    fn replay_is_deterministic_per_seed() {
        let csv = constant_trace_csv(3, 20, 1.25);
        let trace = parse_trace(csv.as_bytes()).unwrap();
        let config = ReplayConfig {
            alpha: 5,
            ..Default::default()
        };
        let a = replay(&trace, &config, 99).unwrap();
        let b = replay(&trace, &config, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_traces_are_rejected_with_the_required_minimum() {
        let csv = constant_trace_csv(2, 9, 0.5);
        let trace = parse_trace(csv.as_bytes()).unwrap();
        let config = ReplayConfig {
            alpha: 5,
            ..Default::default()
        };
        let err = replay(&trace, &config, 1).unwrap_err();
        assert_eq!(
            err,
            ReplayError::TraceTooShort {
                required: 10,
                available: 9
            }
        );
        assert!(err.to_string().contains("10"));
    }

    #[test]
    fn metadata_is_marked_counterfactual() {
        let config = ReplayConfig::default();
        let metadata = ReplayMetadata::new(&config, 7, 5);
        assert!(metadata.counterfactual);
        let json = serde_json::to_string(&metadata).unwrap();
        assert_eq!(
            json,
            r#"{"alpha":100,"mode":"rlo","seed":7,"num_levels":5,"counterfactual":true}"#
        );
    }

    prop_compose! {
        fn arb_trace()(levels in 1usize..4, iterations in 1u64..20, seed in 0u64..1000)
            -> LossTrace
        {
            let mut trace = LossTrace::new(levels);
            let mut state = seed;
            for m in 1..=iterations {
                for level in 0..levels {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    let loss = (state >> 11) as f64 / (1u64 << 53) as f64 * 100.0;
                    trace.record(m, level, loss).unwrap();
                }
            }
            trace
        }
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip_is_byte_identical(trace in arb_trace()) {
            let canonical = serialize_trace(&trace);
            let parsed = parse_trace(canonical.as_bytes()).unwrap();
            prop_assert_eq!(&parsed, &trace);
            prop_assert_eq!(serialize_trace(&parsed), canonical);
        }
    }
}
