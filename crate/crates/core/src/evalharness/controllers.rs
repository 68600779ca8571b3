//! Action sources for evaluation: scripted oracle, uniform random, and a
//! trained policy.

use crate::env::{select_mode, FieldEnv};
use crate::kinematics::{SteeringMode, ACTION_RESCALE};
use crate::learner::Policy;
use crate::world::wrap_angle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const LOOKAHEAD: f64 = 0.6;
const MAX_BEND: f64 = 0.17;

pub trait Controller {
    /// Called before each episode with that episode's seed.
    fn reset(&mut self, _seed: u64) {}
    fn act(&mut self, observation: &[f64], env: &FieldEnv) -> f64;
}

/// Reads the true pose and route and steers straight at the nearest
/// unvisited waypoint. An upper bound used to validate the environment.
#[derive(Debug, Clone, Default)]
pub struct WaypointOracle;

impl Controller for WaypointOracle {
    fn act(&mut self, _obs: &[f64], env: &FieldEnv) -> f64 {
        let (Some(pose), Some(path), Some(field), Some(setup)) = (env.pose(), env.path(), env.field(), env.setup())
        else {
            return 0.0;
        };
        let cfg = env.config();
        let target = path
            .nearest_unvisited(pose.position())
            .map(|(i, _)| path.waypoints[i])
            .unwrap_or(setup.goal);
        let (mode, direction) = select_mode(&pose, target, field, cfg);
        let a = match mode {
            SteeringMode::ZeroTurn => {
                let desired = if pose.heading.abs() <= PI / 2.0 { 0.0 } else { PI };
                wrap_angle(desired - pose.heading) / (ACTION_RESCALE * cfg.dt)
            }
            SteeringMode::Symmetric4ws => {
                // hold the target's corridor line: travel direction bends toward
                // it over a fixed lookahead, heading follows travel direction
                let along = if target.x >= pose.x { 0.0 } else { PI };
                let bend = ((target.y - pose.y) / LOOKAHEAD).atan().clamp(-MAX_BEND, MAX_BEND);
                let travel = along + if along == 0.0 { bend } else { -bend };
                let desired = if direction > 0.0 { travel } else { travel + PI };
                0.5 * wrap_angle(desired - pose.heading) / cfg.dt
            }
            SteeringMode::Lateral => {
                // body y projects onto field y by cos(heading)
                let s = (target.y - pose.y) / pose.heading.cos();
                s / (ACTION_RESCALE * cfg.field.robot.wheel_radius * cfg.dt)
            }
        };
        a.clamp(-1.0, 1.0)
    }
}

/// Uniform actions in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    }

    fn act(&mut self, _obs: &[f64], _env: &FieldEnv) -> f64 {
        self.rng.random_range(-1.0..=1.0)
    }
}
/// Acts with a trained policy, either at the distribution's mode or by
/// sampling.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub policy: Policy,
    pub stochastic: bool,
    rng: ChaCha8Rng,
}

impl PolicyController {
    pub fn new(policy: Policy, stochastic: bool) -> Self {
        Self {
            policy,
            stochastic,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Controller for PolicyController {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAC7);
    }

    fn act(&mut self, obs: &[f64], _env: &FieldEnv) -> f64 {
        if self.stochastic {
            self.policy.sample(obs, &mut self.rng).action
        } else {
            self.policy.deterministic_action(obs)
        }
    }
}
