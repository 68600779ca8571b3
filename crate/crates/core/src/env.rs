//! Episodic navigation environment.
//!
//! One scalar action per step. The environment picks the steering mode from
//! the robot's heading and the nearest unvisited waypoint, converts the action
//! into body motion, integrates the pose, renders both cameras and scores the
//! step.

use crate::kinematics::{
    body_twist_from_mode, wheel_command, KinematicsError, ModeTwist, SteeringMode, WheelCommand,
};
use crate::perception::{
    detect_row, render_camera, CameraModel, CameraMount, DetectorConfig, PerceptionError,
    TrackError, MAX_TRACK_ERROR,
};
use crate::planner::{manhattan, plan_waypoints, PlannerError, WaypointPath};
use crate::world::{
    collision_check, generate_field, integrate, sample_episode, wrap_angle, EpisodeSetup,
    FieldConfig, FieldMap, Point2, Pose2D, WorldError,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const OBS_DIM: usize = 21;
pub const ACTION_HISTORY: usize = 3;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode has ended; call reset")]
    EpisodeOver,
    #[error("no episode in progress; call reset")]
    NotStarted,
    #[error("action must be finite, got {0}")]
    NonFiniteAction(f64),
    #[error("route has no waypoints")]
    EmptyRoute,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub field: FieldConfig,
    pub dt: f64,
    /// Forward speed magnitude in symmetric steering.
    pub v_x: f64,
    /// Truncate once the step counter exceeds this.
    pub max_steps: usize,
    pub goal_radius: f64,
    pub waypoint_radius: f64,
    /// Terminate when the Manhattan distance to the nearest waypoint reaches this.
    pub max_waypoint_distance: f64,
    /// Track error (px) at or below which the camera reward is paid.
    pub track_threshold: f64,
    /// Heading error to the row axis beyond which the robot turns in place.
    pub zero_turn_threshold_deg: f64,
    /// Outside the crop section, a cross-row offset larger than this is
    /// removed laterally before driving along the row.
    pub lateral_tolerance: f64,
    pub front_camera: CameraModel,
    pub rear_camera: CameraModel,
    pub detector: DetectorConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            field: FieldConfig::default(),
            dt: 0.1,
            v_x: 3.0,
            max_steps: 500,
            goal_radius: 0.3,
            waypoint_radius: 0.3,
            max_waypoint_distance: 1.5,
            track_threshold: 40.0,
            zero_turn_threshold_deg: 15.0,
            lateral_tolerance: 0.05,
            front_camera: CameraModel::new(CameraMount::Front),
            rear_camera: CameraModel::new(CameraMount::Rear),
            detector: DetectorConfig::default(),
        }
    }
}

impl EnvConfig {
    /// Three rows of five plants.
    pub fn reduced() -> Self {
        Self {
            field: FieldConfig::reduced(),
            ..Self::default()
        }
    }

    /// Fastest wheel rotation any mode can command with `|action| <= 1`.
    pub fn max_wheel_speed(&self) -> f64 {
        let g = &self.field.robot;
        let sym = (self.v_x + 0.5 * g.track).hypot(0.5 * g.wheelbase) / g.wheel_radius;
        let turn = 3.0 * g.wheelbase.hypot(g.track) / (2.0 * g.wheel_radius);
        sym.max(turn).max(3.0)
    }
}

/// Per-step reward components; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_dist: f64,
    pub r_ctrl: f64,
    pub r_cam: f64,
    pub r_wp: f64,
    pub r_goal: f64,
    pub r_time: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn component_sum(&self) -> f64 {
        self.r_dist + self.r_ctrl + self.r_cam + self.r_wp + self.r_goal + self.r_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Goal,
    Collision,
    LostWaypoint,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub mode: SteeringMode,
    /// Sign applied to the forward speed in symmetric steering.
    pub direction: f64,
    pub pose: Pose2D,
    pub motion: ModeTwist,
    pub joints: [f64; 8],
    pub track_errors: [f64; 2],
    pub waypoint: Option<usize>,
    pub waypoint_distance: f64,
    pub goal_distance: f64,
    pub collision: bool,
    pub outcome: Option<Outcome>,
    pub waypoints_visited: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// Unnormalized observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawObservation {
    pub pose: Pose2D,
    pub goal: Point2,
    pub track_errors: [f64; 2],
    pub actions: [f64; ACTION_HISTORY],
    /// Nearest waypoint in the robot's body frame.
    pub waypoint_offset: Point2,
    pub waypoint_distance: f64,
    pub joints: [f64; 8],
}

/// Scales for [`normalize_observation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScale {
    pub center: Point2,
    pub half_extents: (f64, f64),
    pub md_max: f64,
    pub waypoint_range: f64,
    pub max_wheel_speed: f64,
}

impl ObservationScale {
    pub fn new(field: &FieldMap, config: &EnvConfig) -> Self {
        Self {
            center: field.bounds.center(),
            half_extents: field.bounds.half_extents(),
            md_max: field.md_max(),
            // largest offset before termination plus one step of travel
            waypoint_range: config.max_waypoint_distance + config.v_x * config.dt + config.waypoint_radius,
            max_wheel_speed: config.max_wheel_speed(),
        }
    }
}

fn clamp_unit(v: f64, what: &str) -> f64 {
    if v.abs() > 1.0 + 1e-9 {
        log::warn!("observation component {what} = {v} outside [-1, 1]; clamping");
    }
    v.clamp(-1.0, 1.0)
}

/// Maps raw observation values into `[-1, 1]`, clamping (with a warning) any
/// value outside its declared range.
pub fn normalize_observation(raw: &RawObservation, s: &ObservationScale) -> Vec<f64> {
    let mut o = Vec::with_capacity(OBS_DIM);
    let (hx, hy) = s.half_extents;
    o.push(clamp_unit((raw.pose.x - s.center.x) / hx, "x"));
    o.push(clamp_unit((raw.pose.y - s.center.y) / hy, "y"));
    o.push(clamp_unit(raw.pose.heading / PI, "heading"));
    o.push(clamp_unit((raw.goal.x - s.center.x) / hx, "goal_x"));
    o.push(clamp_unit((raw.goal.y - s.center.y) / hy, "goal_y"));
    for e in raw.track_errors {
        o.push(clamp_unit(e / MAX_TRACK_ERROR, "track_error"));
    }
    for a in raw.actions {
        o.push(clamp_unit(a, "action"));
    }
    o.push(clamp_unit(raw.waypoint_offset.x / s.waypoint_range, "waypoint_x"));
    o.push(clamp_unit(raw.waypoint_offset.y / s.waypoint_range, "waypoint_y"));
    o.push(clamp_unit(raw.waypoint_distance / s.md_max, "waypoint_distance"));
    for a in &raw.joints[..4] {
        o.push(clamp_unit(a / FRAC_PI_2, "steer_angle"));
    }
    for w in &raw.joints[4..] {
        o.push(clamp_unit(w / s.max_wheel_speed, "wheel_speed"));
    }
    o
}

/// Picks the steering mode for the current pose and target waypoint.
///
/// Returns the mode and the sign of forward travel (meaningful only for
/// symmetric steering).
pub fn select_mode(pose: &Pose2D, waypoint: Point2, field: &FieldMap, config: &EnvConfig) -> (SteeringMode, f64) {
    let h = wrap_angle(pose.heading);
    let misalignment = h.abs().min(PI - h.abs());
    if misalignment > config.zero_turn_threshold_deg.to_radians() {
        return (SteeringMode::ZeroTurn, 1.0);
    }
    let (dx, dy) = (waypoint.x - pose.x, waypoint.y - pose.y);
    let cross_row = dy.abs() > dx.abs() || dy.abs() > config.lateral_tolerance;
    if cross_row && !field.in_crop_section(pose.position()) {
        return (SteeringMode::Lateral, 1.0);
    }
    let ahead = dx * h.cos() + dy * h.sin();
    (SteeringMode::Symmetric4ws, if ahead >= 0.0 { 1.0 } else { -1.0 })
}

/// Derives independent sub-seeds from an episode seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything needed to reproduce an episode's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSnapshot {
    pub seed: u64,
    pub field: FieldMap,
    pub setup: EpisodeSetup,
    pub waypoints: Vec<Point2>,
    pub planned_manhattan: f64,
}

#[derive(Debug, Clone)]
struct Episode {
    seed: u64,
    field: FieldMap,
    setup: EpisodeSetup,
    path: WaypointPath,
    planned_manhattan: f64,
    scale: ObservationScale,
    pose: Pose2D,
    actions: [f64; ACTION_HISTORY],
    joints: [f64; 8],
    track_errors: [f64; 2],
    steps: usize,
    done: bool,
    path_length: f64,
}

#[derive(Debug, Clone)]
pub struct FieldEnv {
    config: EnvConfig,
    episode: Option<Episode>,
}

impl FieldEnv {
    pub fn new(config: EnvConfig) -> Self {
        Self {
            config,
            episode: None,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Starts a new episode with a freshly generated field and setup.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let field = generate_field(derive_seed(seed, 1), &self.config.field)?;
        let setup = sample_episode(&field, derive_seed(seed, 2))?;
        self.reset_with(seed, field, setup)
    }

    /// Starts an episode on a given field and setup.
    pub fn reset_with(&mut self, seed: u64, field: FieldMap, setup: EpisodeSetup) -> Result<Vec<f64>, EnvError> {
        let plan = plan_waypoints(&field, setup.start_pose.position(), setup.goal)?;
        self.reset_with_route(seed, field, setup, plan.waypoints)
    }

    /// Starts an episode that follows the given waypoints instead of a
    /// planned route.
    pub fn reset_with_route(
        &mut self,
        seed: u64,
        field: FieldMap,
        setup: EpisodeSetup,
        waypoints: Vec<Point2>,
    ) -> Result<Vec<f64>, EnvError> {
        if waypoints.is_empty() {
            return Err(EnvError::EmptyRoute);
        }
        let path = WaypointPath::new(waypoints);
        let planned_manhattan = path.manhattan_length(setup.start_pose.position());
        let scale = ObservationScale::new(&field, &self.config);
        let mut ep = Episode {
            seed,
            field,
            setup,
            path,
            planned_manhattan,
            scale,
            pose: setup.start_pose,
            actions: [0.0; ACTION_HISTORY],
            joints: [0.0; 8],
            track_errors: [MAX_TRACK_ERROR; 2],
            steps: 0,
            done: false,
            path_length: 0.0,
        };
        ep.track_errors = self.observe_cameras(&ep.pose, &ep.field, seed, 0)?;
        let obs = self.observation(&ep);
        self.episode = Some(ep);
        Ok(obs)
    }

    fn observe_cameras(&self, pose: &Pose2D, field: &FieldMap, seed: u64, step: usize) -> Result<[f64; 2], EnvError> {
        let grain = derive_seed(seed, 1000 + step as u64);
        let mut out = [MAX_TRACK_ERROR; 2];
        for (slot, cam) in out.iter_mut().zip([&self.config.front_camera, &self.config.rear_camera]) {
            let img = render_camera(pose, cam, field, grain);
            let (_, err): (_, TrackError) = detect_row(&img, &self.config.detector)?;
            *slot = err.value;
        }
        Ok(out)
    }

    fn observation(&self, ep: &Episode) -> Vec<f64> {
        let p = ep.pose.position();
        let (offset, md) = match ep.path.nearest_unvisited(p) {
            Some((i, d)) => (ep.pose.to_body(ep.path.waypoints[i]), d),
            None => (ep.pose.to_body(ep.setup.goal), manhattan(p, ep.setup.goal)),
        };
        let raw = RawObservation {
            pose: ep.pose,
            goal: ep.setup.goal,
            track_errors: ep.track_errors,
            actions: ep.actions,
            waypoint_offset: offset,
            waypoint_distance: md,
            joints: ep.joints,
        };
        normalize_observation(&raw, &ep.scale)
    }

    /// Applies one action in `[-1, 1]` (values outside are clipped).
    pub fn step(&mut self, action: f64) -> Result<StepResult, EnvError> {
        if !action.is_finite() {
            return Err(EnvError::NonFiniteAction(action));
        }
        let a = action.clamp(-1.0, 1.0);
        let cfg = &self.config;
        let mut ep = self.episode.take().ok_or(EnvError::NotStarted)?;
        if ep.done {
            self.episode = Some(ep);
            return Err(EnvError::EpisodeOver);
        }

        let target = ep
            .path
            .nearest_unvisited(ep.pose.position())
            .map(|(i, _)| ep.path.waypoints[i])
            .unwrap_or(ep.setup.goal);
        let (mode, direction) = select_mode(&ep.pose, target, &ep.field, cfg);
        let motion = body_twist_from_mode(mode, a, direction * cfg.v_x, &cfg.field.robot)?;
        let cmd: WheelCommand = wheel_command(mode, &motion, &cfg.field.robot)?;
        let next = integrate(ep.pose, mode, &motion, cfg.dt)?;
        ep.path_length += next.position().dist(ep.pose.position());
        ep.pose = next;
        ep.joints = cmd.joints();
        ep.steps += 1;
        let collision = collision_check(&ep.pose, &ep.field);
        let track_errors = self.observe_cameras(&ep.pose, &ep.field, ep.seed, ep.steps)?;
        ep.track_errors = track_errors;

        let mut r = RewardBreakdown {
            r_time: -1.0,
            r_ctrl: -(ep.actions[0] - a).abs() / 2.0,
            ..RewardBreakdown::default()
        };
        if track_errors.iter().any(|&e| e <= cfg.track_threshold) {
            r.r_cam = 1.0;
        }
        let p = ep.pose.position();
        let nearest = ep.path.nearest_unvisited(p);
        let md = nearest.map(|(_, d)| d).unwrap_or_else(|| manhattan(p, ep.setup.goal));
        r.r_dist = -(md / ep.scale.md_max).min(1.0);
        if let Some((i, d)) = nearest {
            if d <= cfg.waypoint_radius {
                ep.path.mark_visited(i);
                r.r_wp = 100.0 / ep.path.n_wp() as f64;
            }
        }

        let goal_distance = p.dist(ep.setup.goal);
        let outcome = if goal_distance <= cfg.goal_radius {
            Some(Outcome::Goal)
        } else if collision {
            Some(Outcome::Collision)
        } else if md >= cfg.max_waypoint_distance {
            Some(Outcome::LostWaypoint)
        } else if ep.steps > cfg.max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        r.r_goal = match outcome {
            Some(Outcome::Goal) => 100.0,
            Some(_) => -100.0,
            None => 0.0,
        };
        r.total = r.component_sum();
        let truncated = outcome == Some(Outcome::Timeout);
        let terminated = outcome.is_some() && !truncated;
        ep.done = outcome.is_some();

        for k in (1..ACTION_HISTORY).rev() {
            ep.actions[k] = ep.actions[k - 1];
        }
        ep.actions[0] = a;

        let info = StepInfo {
            step: ep.steps,
            mode,
            direction,
            pose: ep.pose,
            motion,
            joints: ep.joints,
            track_errors,
            waypoint: nearest.map(|(i, _)| i),
            waypoint_distance: md,
            goal_distance,
            collision,
            outcome,
            waypoints_visited: ep.path.n_visited(),
        };
        let observation = self.observation(&ep);
        self.episode = Some(ep);
        Ok(StepResult {
            observation,
            reward: r,
            terminated,
            truncated,
            info,
        })
    }

    pub fn pose(&self) -> Option<Pose2D> {
        self.episode.as_ref().map(|e| e.pose)
    }

    pub fn field(&self) -> Option<&FieldMap> {
        self.episode.as_ref().map(|e| &e.field)
    }

    pub fn setup(&self) -> Option<&EpisodeSetup> {
        self.episode.as_ref().map(|e| &e.setup)
    }

    pub fn path(&self) -> Option<&WaypointPath> {
        self.episode.as_ref().map(|e| &e.path)
    }

    pub fn joints(&self) -> Option<[f64; 8]> {
        self.episode.as_ref().map(|e| e.joints)
    }

    pub fn track_errors(&self) -> Option<[f64; 2]> {
        self.episode.as_ref().map(|e| e.track_errors)
    }

    pub fn steps(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_none_or(|e| e.done)
    }

    /// Distance driven so far in the current episode.
    pub fn path_length(&self) -> f64 {
        self.episode.as_ref().map_or(0.0, |e| e.path_length)
    }

    /// Manhattan length of the planned route from the start pose.
    pub fn planned_manhattan(&self) -> f64 {
        self.episode.as_ref().map_or(0.0, |e| e.planned_manhattan)
    }

    pub fn snapshot(&self) -> Option<EpisodeSnapshot> {
        self.episode.as_ref().map(|e| EpisodeSnapshot {
            seed: e.seed,
            field: e.field.clone(),
            setup: e.setup,
            waypoints: e.path.waypoints.clone(),
            planned_manhattan: e.planned_manhattan,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced_field() -> FieldMap {
        generate_field(1, &FieldConfig::reduced()).unwrap()
    }

    #[test]
    fn reset_is_deterministic_with_fixed_length() {
        let mut env = FieldEnv::new(EnvConfig::reduced());
        let a = env.reset(5).unwrap();
        let b = env.reset(5).unwrap();
        assert_eq!(a, b);
        for seed in 0..100 {
            let o = env.reset(seed).unwrap();
            assert_eq!(o.len(), OBS_DIM);
            assert!(o.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn step_before_reset_and_after_end() {
        let mut env = FieldEnv::new(EnvConfig::reduced());
        assert!(matches!(env.step(0.0), Err(EnvError::NotStarted)));
        env.reset(3).unwrap();
        assert!(matches!(env.step(f64::NAN), Err(EnvError::NonFiniteAction(_))));
        loop {
            let r = env.step(1.0).unwrap();
            assert!(!(r.terminated && r.truncated));
            if r.terminated || r.truncated {
                break;
            }
        }
        assert!(matches!(env.step(0.0), Err(EnvError::EpisodeOver)));
    }

    #[test]
    fn mode_selection_rules() {
        let f = reduced_field();
        let cfg = EnvConfig::reduced();
        // aligned in a corridor, waypoint ahead
        let pose = Pose2D::new(-1.0, 0.5, 0.0);
        assert_eq!(select_mode(&pose, Point2::new(0.0, 0.5), &f, &cfg), (SteeringMode::Symmetric4ws, 1.0));
        // waypoint behind
        assert_eq!(select_mode(&pose, Point2::new(-2.0, 0.5), &f, &cfg), (SteeringMode::Symmetric4ws, -1.0));
        // facing the other way, waypoint at +x is behind
        let flipped = Pose2D::new(-1.0, 0.5, PI);
        assert_eq!(select_mode(&flipped, Point2::new(0.0, 0.5), &f, &cfg).1, -1.0);
        // headland, waypoint across the rows
        let head = Pose2D::new(3.0, -0.5, 0.0);
        assert_eq!(select_mode(&head, Point2::new(3.0, 0.5), &f, &cfg).0, SteeringMode::Lateral);
        // same offset inside the crop section never goes lateral
        let inside = Pose2D::new(0.0, -0.5, 0.0);
        assert_eq!(select_mode(&inside, Point2::new(0.0, 0.5), &f, &cfg).0, SteeringMode::Symmetric4ws);
        // misaligned by 30 degrees
        let skew = Pose2D::new(-1.0, 0.5, 30f64.to_radians());
        assert_eq!(select_mode(&skew, Point2::new(0.0, 0.5), &f, &cfg).0, SteeringMode::ZeroTurn);
        let skew_back = Pose2D::new(-1.0, 0.5, PI - 0.2);
        assert_eq!(select_mode(&skew_back, Point2::new(0.0, 0.5), &f, &cfg).0, SteeringMode::Symmetric4ws);
        // headland, along-row target but off the corridor line: centre first
        let off = Pose2D::new(-2.0, 0.62, 0.0);
        assert_eq!(select_mode(&off, Point2::new(-1.0, 0.5), &f, &cfg).0, SteeringMode::Lateral);
        let near = Pose2D::new(-2.0, 0.53, 0.0);
        assert_eq!(select_mode(&near, Point2::new(-1.0, 0.5), &f, &cfg).0, SteeringMode::Symmetric4ws);
    }

    #[test]
    fn normalization_examples() {
        let f = reduced_field();
        let cfg = EnvConfig::reduced();
        let s = ObservationScale::new(&f, &cfg);
        let zero = normalize_observation(&RawObservation::default(), &s);
        assert_eq!(zero.len(), OBS_DIM);
        assert!(zero.iter().all(|v| *v == 0.0));
        let raw = RawObservation {
            track_errors: [120.0, 60.0],
            ..RawObservation::default()
        };
        let o = normalize_observation(&raw, &s);
        assert_eq!((o[5], o[6]), (1.0, 0.5));
        let far = RawObservation {
            pose: Pose2D::new(100.0, 0.0, 0.0),
            ..RawObservation::default()
        };
        assert_eq!(normalize_observation(&far, &s)[0], 1.0);
    }

    #[test]
    fn control_penalty_uses_raw_actions() {
        let mut env = FieldEnv::new(EnvConfig::reduced());
        env.reset(11).unwrap();
        let first = env.step(0.8).unwrap();
        assert!((first.reward.r_ctrl + 0.4).abs() < 1e-12);
        if !first.terminated {
            let second = env.step(0.8).unwrap();
            assert_eq!(second.reward.r_ctrl, 0.0);
        }
    }

    #[test]
    fn goal_within_radius_terminates_with_bonus() {
        let f = reduced_field();
        let mut env = FieldEnv::new(EnvConfig::reduced());
        // one cell ahead, goal 0.2 m beyond the first step's end point
        let setup = EpisodeSetup {
            start_pose: Pose2D::new(-1.0, 0.5, 0.0),
            goal: Point2::new(0.0, 0.5),
            rng_seed: 0,
        };
        env.reset_with(0, f, setup).unwrap();
        let mut last = None;
        for _ in 0..4 {
            let r = env.step(0.0).unwrap();
            if r.terminated {
                last = Some(r);
                break;
            }
        }
        let r = last.expect("goal reached");
        assert_eq!(r.info.outcome, Some(Outcome::Goal));
        assert_eq!(r.reward.r_goal, 100.0);
        assert!(r.info.goal_distance <= 0.3);
    }

    #[test]
    fn wandering_off_the_route_terminates() {
        let f = reduced_field();
        let mut env = FieldEnv::new(EnvConfig::reduced());
        // headland start; the route runs across the rows toward +y
        let setup = EpisodeSetup {
            start_pose: Pose2D::new(3.0, -1.5, 0.0),
            goal: Point2::new(3.0, 1.5),
            rng_seed: 0,
        };
        env.reset_with(0, f, setup).unwrap();
        // negative lateral action slides toward -y, away from the route
        let mut last = None;
        for _ in 0..100 {
            let r = env.step(-1.0).unwrap();
            assert_eq!(r.info.mode, SteeringMode::Lateral);
            if r.terminated || r.truncated {
                last = Some(r);
                break;
            }
        }
        let r = last.unwrap();
        assert_eq!(r.info.outcome, Some(Outcome::LostWaypoint));
        assert!(r.terminated && !r.truncated);
        assert!(r.info.waypoint_distance >= 1.5);
        assert_eq!(r.reward.r_goal, -100.0);
    }

    #[test]
    fn reward_components_sum() {
        let mut env = FieldEnv::new(EnvConfig::reduced());
        for seed in 0..5 {
            env.reset(seed).unwrap();
            let mut k = 0;
            loop {
                let a = ((k as f64) * 0.37).sin();
                let r = env.step(a).unwrap();
                assert_eq!(r.reward.total, r.reward.component_sum());
                assert!((-1.0..=1.0).contains(&r.reward.r_dist));
                assert!((-1.0..=0.0).contains(&r.reward.r_ctrl));
                k += 1;
                if r.terminated || r.truncated {
                    break;
                }
            }
        }
    }
}
