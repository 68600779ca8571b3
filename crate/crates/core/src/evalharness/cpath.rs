//! The C-shaped course: 4WIS4WID navigation against a skid-steer robot
//! running a PD waypoint follower.

use super::{run_episode, Controller, EvalError, TrialRecord};
use crate::baseline::{pd_control, skid_steer_step, PdGains, PdState};
use crate::env::{EnvConfig, FieldEnv, Outcome};
use crate::planner::manhattan;
use crate::trace::{TraceHeader, TraceSource, TraceStep};
use crate::world::{collision_check, generate_field, EpisodeSetup, FieldConfig, FieldMap, Point2, Pose2D};
use serde::{Deserialize, Serialize};

/// Start pose and grid waypoints of the C-course on the reduced field:
/// 2 m along a corridor, 2 m across the headland, 2 m back.
pub fn c_course() -> (Pose2D, Vec<Point2>) {
    let start = Pose2D::new(0.0, -0.5, 0.0);
    let wps = [(1.0, -0.5), (2.0, -0.5), (2.0, 0.5), (2.0, 1.5), (1.0, 1.5), (0.0, 1.5)]
        .map(|(x, y)| Point2::new(x, y))
        .to_vec();
    (start, wps)
}

/// Corners of the C: the skid-steer robot drives corner to corner.
pub fn c_course_corners() -> Vec<Point2> {
    vec![Point2::new(2.0, -0.5), Point2::new(2.0, 1.5), Point2::new(0.0, 1.5)]
}

/// Reduced field with straight rows.
pub fn c_course_field(base: &FieldConfig, seed: u64) -> Result<FieldMap, EvalError> {
    let cfg = FieldConfig {
        jitter_max_deg: 0.0,
        ..base.clone()
    };
    Ok(generate_field(seed, &cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpathResult {
    pub four_ws: TrialRecord,
    pub skid_steer: TrialRecord,
    pub distance_ratio: f64,
    pub time_ratio: f64,
    pub course_manhattan: f64,
    pub four_ws_start: Point2,
    pub skid_start: Point2,
    pub four_ws_end: Point2,
    pub skid_end: Point2,
    #[serde(skip)]
    pub four_ws_trace: (Option<TraceHeader>, Vec<TraceStep>),
    #[serde(skip)]
    pub skid_trace: (Option<TraceHeader>, Vec<TraceStep>),
}

/// Drives the skid-steer robot through `wps`, switching to the next
/// waypoint inside the waypoint radius and stopping at the last one.
pub fn run_skid_steer(
    field: &FieldMap,
    start: Pose2D,
    wps: &[Point2],
    gains: &PdGains,
    dt: f64,
    max_steps: usize,
) -> Result<(TrialRecord, Vec<TraceStep>), EvalError> {
    gains.validate()?;
    let mut pose = start;
    let mut k = 0;
    let mut state = PdState::default();
    let mut steps = Vec::new();
    let mut path = 0.0;
    let mut outcome = None;
    let goal = *wps.last().ok_or_else(|| EvalError::Invalid("empty course".into()))?;
    for step in 1..=max_steps {
        while k + 1 < wps.len() && pose.position().dist(wps[k]) <= gains.waypoint_radius {
            k += 1;
            state = PdState::default();
        }
        let g = if k + 1 == wps.len() {
            *gains
        } else {
            PdGains {
                stop_radius: gains.waypoint_radius,
                ..*gains
            }
        };
        let (v, w) = pd_control(&pose, wps[k], &g, &mut state, dt);
        if k + 1 == wps.len() && v == 0.0 && w == 0.0 {
            outcome = Some(Outcome::Goal);
            break;
        }
        let next = skid_steer_step(pose, v, w, dt)?;
        path += next.position().dist(pose.position());
        pose = next;
        let collided = collision_check(&pose, field);
        steps.push(TraceStep {
            step,
            time: step as f64 * dt,
            mode: None,
            direction: v,
            action: w,
            pose,
            joints: [0.0; 8],
            track_errors: [crate::perception::MAX_TRACK_ERROR; 2],
            reward: None,
            outcome: collided.then_some(Outcome::Collision),
        });
        if collided {
            outcome = Some(Outcome::Collision);
            break;
        }
    }
    let n = steps.len();
    let outcome = outcome.or(Some(Outcome::Timeout));
    let record = TrialRecord {
        seed: 0,
        success: outcome == Some(Outcome::Goal),
        outcome,
        steps: n,
        path_length: path,
        manhattan_assigned: course_manhattan(start.position(), wps),
        wall_time_sim: n as f64 * dt,
        mean_track_error: crate::perception::MAX_TRACK_ERROR,
        final_goal_distance: pose.position().dist(goal),
        trace: None,
    };
    Ok((record, steps))
}

fn course_manhattan(start: Point2, wps: &[Point2]) -> f64 {
    let mut prev = start;
    let mut total = 0.0;
    for &w in wps {
        total += manhattan(prev, w);
        prev = w;
    }
    total
}

/// Runs both robots on the same course and field.
pub fn run_cpath_comparison(
    ctrl: &mut dyn Controller,
    env_config: &EnvConfig,
    gains: &PdGains,
    seed: u64,
) -> Result<CpathResult, EvalError> {
    let field = c_course_field(&env_config.field, seed)?;
    let (start, wps) = c_course();
    let goal = *wps.last().unwrap_or(&start.position());

    let mut env = FieldEnv::new(env_config.clone());
    let setup = EpisodeSetup {
        start_pose: start,
        goal,
        rng_seed: seed,
    };
    ctrl.reset(seed);
    let obs = env.reset_with_route(seed, field.clone(), setup, wps.clone())?;
    let header = TraceHeader::new(TraceSource::Policy, seed, env_config.clone(), start, env.snapshot());
    let (mut four, four_steps) = run_episode(&mut env, obs, ctrl, seed)?;
    four.seed = seed;

    let max_steps = 20 * env_config.max_steps;
    let (mut skid, skid_steps) = run_skid_steer(&field, start, &c_course_corners(), gains, env_config.dt, max_steps)?;
    skid.seed = seed;
    let skid_header = TraceHeader::new(TraceSource::Baseline, seed, env_config.clone(), start, None);

    let end = |s: &[TraceStep]| s.last().map(|t| t.pose.position()).unwrap_or(start.position());
    Ok(CpathResult {
        distance_ratio: four.path_length / skid.path_length,
        time_ratio: four.wall_time_sim / skid.wall_time_sim,
        course_manhattan: course_manhattan(start.position(), &wps),
        four_ws_start: start.position(),
        skid_start: start.position(),
        four_ws_end: end(&four_steps),
        skid_end: end(&skid_steps),
        four_ws: four,
        skid_steer: skid,
        four_ws_trace: (Some(header), four_steps),
        skid_trace: (Some(skid_header), skid_steps),
    })
}
