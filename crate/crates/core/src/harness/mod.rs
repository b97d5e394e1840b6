//! Experiment orchestration: seeded training runs, evaluation rollouts,
//! static-plan sweeps, demand calibration and comparison reports.
//!
//! Seeds: training run `i` with base seed `b` uses run seed
//! `splitmix64(b + i)`; the simulation takes the run seed directly and the
//! agent at intersection `j` takes `splitmix64(run_seed + j + 1)`.
//! Evaluation rollouts use the seeds `1..=M` as simulation seeds.

mod calibrate;
mod eval;
mod report;
mod train;

pub use calibrate::{calibrate_demand, queue_stats, CalibrateConfig, QueueStats};
pub use eval::{
    evaluate, evaluate_policies, rollout, summarize, sweep_static, EvalConfig, EvalResult, MethodSummary, Policy,
    Rollout, RolloutMeans, SweepResult,
};
pub use report::{
    compare, summary_csv, write_compare_report, write_report_files, CompareReport, KdeTable, MetricStats, StatsReport, ALPHA,
    METRICS, SUMMARY_HEADER,
};
pub use train::{
    agent_seed, read_monitor, run_seed, train_many, train_run, write_train_run, MonitorRow, TrainOutcome, TrainRunConfig,
    DEFAULT_MAX_TELEPORT_RATE,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::CheckpointError;
use crate::scenario::ScenarioError;
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("run aborted at cycle {cycle}: teleport rate {rate:.3} exceeds {limit:.3} (persistent gridlock)")]
    Gridlock { cycle: u64, rate: f64, limit: f64 },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

pub(crate) fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// File-system friendly form of a method label.
pub fn slug(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Evaluation seeds `1..=m`.
pub fn eval_seeds(m: usize) -> Vec<u64> {
    (1..=m as u64).collect()
}

/// Errors if any training run seed is also an evaluation seed.
pub fn check_disjoint(train: &[u64], eval: &[u64]) -> Result<(), HarnessError> {
    match train.iter().find(|s| eval.contains(s)) {
        Some(s) => Err(HarnessError::Config(format!("seed {s} is used for both training and evaluation"))),
        None => Ok(()),
    }
}

/// Checkpoint files named by a `dqn:` path: the file itself, a run directory
/// holding `checkpoint.json`, or a directory of run directories.
pub fn checkpoint_paths(path: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let direct = path.join("checkpoint.json");
    if direct.is_file() {
        return Ok(vec![direct]);
    }
    let entries = std::fs::read_dir(path).map_err(io_err(path))?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("checkpoint.json"))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(HarnessError::Config(format!("no checkpoint found under {}", path.display())));
    }
    Ok(found)
}
