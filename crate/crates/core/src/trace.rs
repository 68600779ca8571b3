//! Episode traces as JSON lines: one header, then one record per step.
//!
//! Replay re-integrates the recorded commands with the kinematic model and
//! checks the poses bit for bit, so it needs no rendering.

use crate::env::{EnvConfig, EpisodeSnapshot, Outcome, RewardBreakdown, StepInfo};
use crate::kinematics::{body_twist_from_mode, SteeringMode};
use crate::world::{integrate, Pose2D};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

pub const TRACE_FORMAT: &str = "furrow-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a trace: {0}")]
    Header(String),
    #[error("replay failed: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Episode,
    Teleop,
    Policy,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub source: TraceSource,
    pub seed: u64,
    pub env_config: EnvConfig,
    pub start_pose: Pose2D,
    pub snapshot: Option<EpisodeSnapshot>,
}

impl TraceHeader {
    pub fn new(source: TraceSource, seed: u64, env_config: EnvConfig, start_pose: Pose2D, snapshot: Option<EpisodeSnapshot>) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            source,
            seed,
            env_config,
            start_pose,
            snapshot,
        }
    }
}

/// One simulation step. `mode` is `None` for robots without 4WS modes
/// (the skid-steer baseline), whose commands are `(v, omega)` in
/// `action`/`direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Simulated seconds at the end of the step.
    pub time: f64,
    pub mode: Option<SteeringMode>,
    pub direction: f64,
    pub action: f64,
    pub pose: Pose2D,
    pub joints: [f64; 8],
    pub track_errors: [f64; 2],
    pub reward: Option<RewardBreakdown>,
    pub outcome: Option<Outcome>,
}

impl TraceStep {
    pub fn from_info(info: &StepInfo, action: f64, reward: Option<RewardBreakdown>, dt: f64) -> Self {
        Self {
            step: info.step,
            time: info.step as f64 * dt,
            mode: Some(info.mode),
            direction: info.direction,
            action,
            pose: info.pose,
            joints: info.joints,
            track_errors: info.track_errors,
            reward,
            outcome: info.outcome,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Step(TraceStep),
}

/// Streams trace lines to any writer.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> Result<Self, TraceError> {
        serde_json::to_writer(&mut out, &Line::Header(header.clone()))?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn step(&mut self, s: &TraceStep) -> Result<(), TraceError> {
        serde_json::to_writer(&mut self.out, &Line::Step(s.clone()))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TraceError> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl Trace {
    pub fn write(&self, out: impl Write) -> Result<(), TraceError> {
        let mut w = TraceWriter::new(out, &self.header)?;
        for s in &self.steps {
            w.step(s)?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), TraceError> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read(input: impl BufRead) -> Result<Self, TraceError> {
        let mut header = None;
        let mut steps = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| TraceError::Parse { line: i + 1, source: e })?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => return Err(TraceError::Header(format!("second header on line {}", i + 1))),
                Line::Step(s) if header.is_some() => steps.push(s),
                Line::Step(_) => return Err(TraceError::Header("step before header".into())),
            }
        }
        let header = header.ok_or_else(|| TraceError::Header("missing header".into()))?;
        if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
            return Err(TraceError::Header(format!("{} v{}", header.format, header.version)));
        }
        Ok(Self { header, steps })
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps: usize,
    pub mode_switches: usize,
    pub final_pose: Pose2D,
    /// Largest position difference between recorded and replayed poses.
    pub max_position_error: f64,
    pub identical: bool,
}

/// Re-integrates every recorded command from the header's start pose.
pub fn replay(trace: &Trace) -> Result<ReplayReport, TraceError> {
    let cfg = &trace.header.env_config;
    let mut pose = trace.header.start_pose;
    let mut max_err: f64 = 0.0;
    let mut identical = true;
    let mut switches = 0;
    let mut last_mode = None;
    for s in &trace.steps {
        pose = match s.mode {
            Some(mode) => {
                let twist = body_twist_from_mode(mode, s.action, s.direction * cfg.v_x, &cfg.field.robot)
                    .map_err(|e| TraceError::Replay(format!("step {}: {e}", s.step)))?;
                integrate(pose, mode, &twist, cfg.dt).map_err(|e| TraceError::Replay(format!("step {}: {e}", s.step)))?
            }
            None => crate::baseline::skid_steer_step(pose, s.direction, s.action, cfg.dt)
                .map_err(|e| TraceError::Replay(format!("step {}: {e}", s.step)))?,
        };
        if last_mode.is_some() && s.mode != last_mode.flatten() {
            switches += 1;
        }
        last_mode = Some(s.mode);
        max_err = max_err.max(pose.position().dist(s.pose.position()));
        identical &= pose == s.pose;
    }
    Ok(ReplayReport {
        steps: trace.steps.len(),
        mode_switches: switches,
        final_pose: pose,
        max_position_error: max_err,
        identical,
    })
}
