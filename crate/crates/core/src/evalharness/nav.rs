//! Randomised multi-row navigation trials.

use super::{mean, run_episode, Controller, EvalError, TrialRecord};
use crate::env::{derive_seed, EnvConfig, FieldEnv};
use crate::trace::{Trace, TraceHeader, TraceSource};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Evaluation episode seeds live in their own stream.
const EVAL_STREAM: u64 = 1 << 40;

pub fn trial_seed(master_seed: u64, i: usize) -> u64 {
    derive_seed(master_seed, EVAL_STREAM + i as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavSummary {
    pub master_seed: u64,
    pub n_trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over successful trials only.
    pub mean_path_length: Option<f64>,
    pub mean_manhattan: Option<f64>,
    pub mean_time: Option<f64>,
    pub mean_track_error: Option<f64>,
}

impl NavSummary {
    /// Travelled distance below the assigned Manhattan distance, on average.
    pub fn path_below_manhattan(&self) -> Option<bool> {
        Some(self.mean_path_length? < self.mean_manhattan?)
    }
}

pub fn summarize(records: &[TrialRecord], master_seed: u64) -> NavSummary {
    let ok = || records.iter().filter(|r| r.success);
    let successes = ok().count();
    NavSummary {
        master_seed,
        n_trials: records.len(),
        successes,
        success_rate: if records.is_empty() { 0.0 } else { successes as f64 / records.len() as f64 },
        mean_path_length: mean(ok().map(|r| r.path_length)),
        mean_manhattan: mean(ok().map(|r| r.manhattan_assigned)),
        mean_time: mean(ok().map(|r| r.wall_time_sim)),
        mean_track_error: mean(ok().map(|r| r.mean_track_error)),
    }
}

/// Runs `n_trials` seeded episodes (in parallel, merged in seed order). With
/// `out_dir`, writes `trials.csv`, `summary.json` and one trace per trial.
pub fn run_navigation_suite<C: Controller + Clone + Send + Sync>(
    ctrl: &C,
    env_config: &EnvConfig,
    n_trials: usize,
    master_seed: u64,
    out_dir: Option<&Path>,
) -> Result<(Vec<TrialRecord>, NavSummary), EvalError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("traces"))?;
    }
    let records = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(master_seed, i);
            let mut env = FieldEnv::new(env_config.clone());
            let mut c = ctrl.clone();
            c.reset(seed);
            let obs = env.reset(seed)?;
            let header = TraceHeader::new(
                TraceSource::Episode,
                seed,
                env_config.clone(),
                env.pose().unwrap_or_default(),
                env.snapshot(),
            );
            let (mut rec, steps) = run_episode(&mut env, obs, &mut c, seed)?;
            if let Some(dir) = out_dir {
                let name = format!("traces/trial_{i:04}.jsonl");
                Trace { header, steps }.save(&dir.join(&name))?;
                rec.trace = Some(name);
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let summary = summarize(&records, master_seed);
    if let Some(dir) = out_dir {
        write_trials_csv(&records, &dir.join("trials.csv"))?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok((records, summary))
}

pub fn write_trials_csv(records: &[TrialRecord], path: &Path) -> Result<(), EvalError> {
    super::write_csv(records, path)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}
