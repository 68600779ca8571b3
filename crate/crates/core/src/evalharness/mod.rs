//! Scripted experiments: single-row tracking, multi-row navigation and the
//! C-path comparison against a skid-steer robot.

pub mod controllers;
pub mod cpath;
pub mod nav;
pub mod rows;

use crate::env::{EnvError, FieldEnv, Outcome};
use crate::trace::{TraceError, TraceStep};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub use controllers::{Controller, PolicyController, RandomController, WaypointOracle};
pub use cpath::{c_course, c_course_corners, run_cpath_comparison, CpathResult};
pub use nav::{read_trials_csv, run_navigation_suite, summarize, trial_seed, write_trials_csv, NavSummary};
pub use rows::{run_row_tracking, RowFollower, RowSummary, RowTrackingConfig, RowTrial};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Baseline(#[from] crate::baseline::BaselineError),
    #[error(transparent)]
    Perception(#[from] crate::perception::PerceptionError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub success: bool,
    pub outcome: Option<Outcome>,
    pub steps: usize,
    pub path_length: f64,
    pub manhattan_assigned: f64,
    /// Simulated seconds.
    pub wall_time_sim: f64,
    pub mean_track_error: f64,
    pub final_goal_distance: f64,
    pub trace: Option<String>,
}

/// Runs an already reset episode to its end. Returns the record and the
/// per-step trace.
pub fn run_episode(
    env: &mut FieldEnv,
    mut obs: Vec<f64>,
    ctrl: &mut dyn Controller,
    seed: u64,
) -> Result<(TrialRecord, Vec<TraceStep>), EvalError> {
    let dt = env.config().dt;
    let mut steps = Vec::new();
    let mut err_sum = 0.0;
    let mut last = None;
    while !env.is_done() {
        let a = ctrl.act(&obs, env);
        let r = env.step(a)?;
        err_sum += r.info.track_errors[0];
        steps.push(TraceStep::from_info(&r.info, a.clamp(-1.0, 1.0), Some(r.reward), dt));
        obs = r.observation;
        last = Some(r.info);
    }
    let info = last.ok_or_else(|| EvalError::Invalid("episode ended before its first step".into()))?;
    let record = TrialRecord {
        seed,
        success: info.outcome == Some(Outcome::Goal),
        outcome: info.outcome,
        steps: info.step,
        path_length: env.path_length(),
        manhattan_assigned: env.planned_manhattan(),
        wall_time_sim: info.step as f64 * dt,
        mean_track_error: err_sum / info.step as f64,
        final_goal_distance: info.goal_distance,
        trace: None,
    };
    Ok((record, steps))
}

/// One CSV row per record, header from the field names.
pub fn write_csv<T: Serialize>(records: &[T], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}
