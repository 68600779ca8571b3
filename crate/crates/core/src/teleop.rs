//! Interactive driving session: keyboard/joystick commands or policy
//! playback stepping a field at the control rate.
//!
//! The session is transport-agnostic; the telemetry server feeds it
//! commands and broadcasts the frames it returns.

use crate::env::{EnvConfig, EnvError, FieldEnv, Outcome, RewardBreakdown};
use crate::kinematics::{body_twist_from_mode, wheel_command, SteeringMode};
use crate::learner::{Checkpoint, LearnerError, Policy};
use crate::perception::{detect_row, render_camera, PerceptionError};
use crate::trace::{Trace, TraceHeader, TraceSource, TraceStep};
use crate::world::{collision_check, generate_field, integrate, sample_episode, EpisodeSetup, FieldMap, Point2, Pose2D, WorldError};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FRAME_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TeleopError {
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("kinematics: {0}")]
    Kinematics(#[from] crate::kinematics::KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleopCommand {
    pub mode: SteeringMode,
    /// Steering input in `[-1, 1]`; clamped on receipt.
    pub omega: f64,
    /// Travel direction in symmetric steering: 1, -1, or 0 to stop.
    #[serde(default = "one")]
    pub v_x_sign: f64,
}

fn one() -> f64 {
    1.0
}

impl TeleopCommand {
    pub fn new(mode: SteeringMode, omega: f64, v_x_sign: f64) -> Self {
        Self { mode, omega, v_x_sign }
    }

    /// Clamps `omega` and checks the direction sign.
    pub fn sanitized(self) -> Result<Self, TeleopError> {
        if !self.omega.is_finite() {
            return Err(TeleopError::InvalidCommand("omega must be finite".into()));
        }
        if ![-1.0, 0.0, 1.0].contains(&self.v_x_sign) {
            return Err(TeleopError::InvalidCommand(format!("v_x_sign must be -1, 0 or 1, got {}", self.v_x_sign)));
        }
        Ok(Self {
            omega: self.omega.clamp(-1.0, 1.0),
            ..self
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ControlMessage {
    /// New field and start pose; keeps the seed when none is given.
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Pause,
    Resume,
    /// Hands control to a trained policy from its current pose.
    PlayPolicy { checkpoint: String },
    /// Returns control to the driver.
    Teleop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSource {
    Teleop,
    Policy,
}

/// Everything a client needs to draw one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub version: u32,
    /// Increments on every reset.
    pub episode: u64,
    pub step: usize,
    /// Simulated seconds since the last reset.
    pub time: f64,
    pub pose: Pose2D,
    pub mode: SteeringMode,
    /// Four steer angles then four wheel speeds.
    pub joints: [f64; 8],
    pub track_errors: [f64; 2],
    pub reward: Option<RewardBreakdown>,
    pub waypoints: Vec<Point2>,
    pub goal: Point2,
    pub source: ControlSource,
    pub paused: bool,
    pub collision: bool,
    pub outcome: Option<Outcome>,
}

struct Playback {
    policy: Policy,
    env: FieldEnv,
    obs: Vec<f64>,
}

pub struct TeleopSession {
    config: EnvConfig,
    seed: u64,
    episode: u64,
    field: FieldMap,
    setup: EpisodeSetup,
    pose: Pose2D,
    mode: SteeringMode,
    joints: [f64; 8],
    track_errors: [f64; 2],
    reward: Option<RewardBreakdown>,
    waypoints: Vec<Point2>,
    step: usize,
    command: Option<TeleopCommand>,
    paused: bool,
    collision: bool,
    outcome: Option<Outcome>,
    playback: Option<Playback>,
    trace: Trace,
}

impl TeleopSession {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, TeleopError> {
        let field = generate_field(crate::env::derive_seed(seed, 1), &config.field)?;
        let setup = sample_episode(&field, crate::env::derive_seed(seed, 2))?;
        let trace = Trace {
            header: TraceHeader::new(TraceSource::Teleop, seed, config.clone(), setup.start_pose, None),
            steps: Vec::new(),
        };
        let mut s = Self {
            config,
            seed,
            episode: 0,
            field,
            setup,
            pose: setup.start_pose,
            mode: SteeringMode::Symmetric4ws,
            joints: [0.0; 8],
            track_errors: [crate::perception::MAX_TRACK_ERROR; 2],
            reward: None,
            waypoints: Vec::new(),
            step: 0,
            command: None,
            paused: false,
            collision: false,
            outcome: None,
            playback: None,
            trace,
        };
        s.track_errors = s.observe()?;
        Ok(s)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn field(&self) -> &FieldMap {
        &self.field
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Latest command; applied on every following step until replaced.
    pub fn apply_command(&mut self, cmd: TeleopCommand) -> Result<(), TeleopError> {
        self.command = Some(cmd.sanitized()?);
        Ok(())
    }

    pub fn control(&mut self, msg: &ControlMessage) -> Result<(), TeleopError> {
        match msg {
            ControlMessage::Reset { seed } => {
                let config = self.config.clone();
                let episode = self.episode + 1;
                *self = Self::new(config, seed.unwrap_or(self.seed))?;
                self.episode = episode;
            }
            ControlMessage::Pause => self.paused = true,
            ControlMessage::Resume => self.paused = false,
            ControlMessage::PlayPolicy { checkpoint } => {
                let ck = Checkpoint::load(Path::new(checkpoint))?;
                self.start_playback(ck.policy)?;
            }
            ControlMessage::Teleop => self.playback = None,
        }
        Ok(())
    }

    /// Starts policy playback from the current pose toward the session goal.
    pub fn start_playback(&mut self, policy: Policy) -> Result<(), TeleopError> {
        let mut env = FieldEnv::new(self.config.clone());
        let setup = EpisodeSetup {
            start_pose: self.pose,
            ..self.setup
        };
        let obs = env.reset_with(self.seed, self.field.clone(), setup)?;
        self.waypoints = env.path().map(|p| p.waypoints.clone()).unwrap_or_default();
        self.outcome = None;
        self.playback = Some(Playback { policy, env, obs });
        Ok(())
    }

    fn observe(&self) -> Result<[f64; 2], TeleopError> {
        let grain = crate::env::derive_seed(self.seed, 1000 + self.step as u64);
        let mut out = [0.0; 2];
        for (slot, cam) in out.iter_mut().zip([&self.config.front_camera, &self.config.rear_camera]) {
            let img = render_camera(&self.pose, cam, &self.field, grain);
            *slot = detect_row(&img, &self.config.detector)?.1.value;
        }
        Ok(out)
    }

    /// Advances one control step. Returns `None` while paused.
    pub fn step(&mut self) -> Result<Option<TelemetryFrame>, TeleopError> {
        if self.paused {
            return Ok(None);
        }
        let record = if let Some(pb) = self.playback.as_mut() {
            let a = pb.policy.deterministic_action(&pb.obs);
            let r = pb.env.step(a)?;
            pb.obs = r.observation;
            self.step += 1;
            self.pose = r.info.pose;
            self.mode = r.info.mode;
            self.joints = r.info.joints;
            self.track_errors = r.info.track_errors;
            self.reward = Some(r.reward);
            self.collision = r.info.collision;
            self.outcome = r.info.outcome;
            let mut rec = TraceStep::from_info(&r.info, a.clamp(-1.0, 1.0), Some(r.reward), self.config.dt);
            rec.step = self.step;
            rec.time = self.time();
            if r.terminated || r.truncated {
                self.playback = None;
                self.command = None;
            }
            rec
        } else {
            // zero-order hold; no command yet means standing still
            let (mode, omega, sign) = match self.command {
                Some(c) if c.mode != SteeringMode::Symmetric4ws || c.v_x_sign != 0.0 => (c.mode, c.omega, c.v_x_sign),
                Some(c) => (c.mode, 0.0, 0.0),
                None => (SteeringMode::Symmetric4ws, 0.0, 0.0),
            };
            let motion = body_twist_from_mode(mode, omega, sign * self.config.v_x, &self.config.field.robot)?;
            let cmd = wheel_command(mode, &motion, &self.config.field.robot)?;
            self.pose = integrate(self.pose, mode, &motion, self.config.dt)?;
            self.step += 1;
            self.mode = mode;
            self.joints = cmd.joints();
            self.track_errors = self.observe()?;
            self.reward = None;
            self.collision = collision_check(&self.pose, &self.field);
            TraceStep {
                step: self.step,
                time: self.time(),
                mode: Some(mode),
                direction: sign,
                action: omega,
                pose: self.pose,
                joints: self.joints,
                track_errors: self.track_errors,
                reward: None,
                outcome: None,
            }
        };
        self.trace.steps.push(record);
        Ok(Some(self.frame()))
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn frame(&self) -> TelemetryFrame {
        TelemetryFrame {
            version: FRAME_VERSION,
            episode: self.episode,
            step: self.step,
            time: self.time(),
            pose: self.pose,
            mode: self.mode,
            joints: self.joints,
            track_errors: self.track_errors,
            reward: self.reward,
            waypoints: self.waypoints.clone(),
            goal: self.setup.goal,
            source: if self.playback.is_some() { ControlSource::Policy } else { ControlSource::Teleop },
            paused: self.paused,
            collision: self.collision,
            outcome: self.outcome,
        }
    }

    /// Everything driven since the last reset, in trace form.
    pub fn trace(&self) -> &Trace {
        &self.trace
    }
}
