//! Single curved row followed with the front camera only.

use super::{EvalError, mean};
use crate::env::{derive_seed, EnvConfig};
use crate::kinematics::{body_twist_from_mode, SteeringMode};
use crate::perception::{detect_row, render_camera, CameraModel, LineSegment, CROPPED_WIDTH};
use crate::world::{integrate, CropRow, FieldConfig, FieldMap, Point2, Pose2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RowTrackingConfig {
    /// Start-to-goal distance along the row axis.
    pub length: f64,
    /// Lateral sinusoid amplitude; 0 gives a straight row.
    pub amplitude: f64,
    pub wavelength: f64,
    pub plant_spacing: f64,
    /// Start offsets across the row are drawn from `[-max, max]`.
    pub start_offset_max: f64,
    pub heading_jitter_deg: f64,
    pub max_steps: usize,
    /// Trial fails once the robot is this far from the row.
    pub lost_distance: f64,
}

impl Default for RowTrackingConfig {
    fn default() -> Self {
        Self {
            length: 9.0,
            amplitude: 0.3,
            wavelength: 9.0,
            plant_spacing: 0.3,
            start_offset_max: 0.05,
            heading_jitter_deg: 2.0,
            max_steps: 300,
            lost_distance: 1.0,
        }
    }
}

impl RowTrackingConfig {
    pub fn row_y(&self, x: f64, phase: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * x / self.wavelength + phase).sin()
    }

    fn row_slope(&self, x: f64, phase: f64) -> f64 {
        let k = std::f64::consts::TAU / self.wavelength;
        self.amplitude * k * (k * x + phase).cos()
    }

    /// One row of plants along the sinusoid, extending past both ends.
    pub fn field(&self, base: &FieldConfig, phase: f64) -> Result<FieldMap, EvalError> {
        let n = ((self.length + 4.0) / self.plant_spacing).ceil() as usize;
        let plants: Vec<Point2> = (0..=n)
            .map(|k| {
                let x = -1.0 + k as f64 * self.plant_spacing;
                Point2::new(x, self.row_y(x, phase))
            })
            .collect();
        let row = CropRow {
            center: Point2::new(0.5 * self.length, 0.0),
            plant_centers: plants,
            axis: Point2::new(1.0, 0.0),
            orientation_jitter: 0.0,
        };
        let cfg = FieldConfig {
            n_rows: 1,
            ..base.clone()
        };
        Ok(FieldMap::from_rows(cfg, vec![row])?)
    }
}

/// Steers along the detected row line: pure pursuit toward the far end of
/// the selected segment, projected back onto the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowFollower {
    /// Yaw rate per unit curvature-speed product, before clamping.
    pub gain: f64,
}

impl Default for RowFollower {
    fn default() -> Self {
        Self { gain: 1.0 }
    }
}

impl RowFollower {
    pub fn act(&self, seg: Option<&LineSegment>, cam: &CameraModel, v_x: f64) -> Option<f64> {
        let s = seg?;
        let (top, _) = s.top_down();
        let x0 = (cam.image_width - CROPPED_WIDTH) as f64 / 2.0;
        let (d, y) = cam.unproject(top[0] + x0 + 0.5, top[1] + 0.5);
        let l2 = d * d + y * y;
        Some((self.gain * v_x * 2.0 * y / l2).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTrial {
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub path_length: f64,
    pub time: f64,
    pub mean_track_error: f64,
    pub std_track_error: f64,
    /// Mean distance from the robot to the row curve.
    pub mean_row_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub n_trials: usize,
    pub success_rate: f64,
    pub mean_path_length: Option<f64>,
    pub mean_time: Option<f64>,
    pub mean_track_error: Option<f64>,
    pub std_track_error: Option<f64>,
}

fn run_row_trial(
    follower: &RowFollower,
    env_config: &EnvConfig,
    rc: &RowTrackingConfig,
    seed: u64,
) -> Result<RowTrial, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let phase = if rc.amplitude > 0.0 { rng.random_range(0.0..std::f64::consts::TAU) } else { 0.0 };
    let field = rc.field(&env_config.field, phase)?;
    let cam = &env_config.front_camera;
    let dy = rng.random_range(-rc.start_offset_max..=rc.start_offset_max);
    let dh = rng.random_range(-rc.heading_jitter_deg..=rc.heading_jitter_deg).to_radians();
    let mut pose = Pose2D::new(0.0, rc.row_y(0.0, phase) + dy, rc.row_slope(0.0, phase).atan() + dh);
    let goal = Point2::new(rc.length, rc.row_y(rc.length, phase));

    let mut errors = Vec::new();
    let mut offsets = Vec::new();
    let mut path = 0.0;
    let mut action = 0.0;
    let mut success = false;
    let mut steps = 0;
    while steps < rc.max_steps {
        let img = render_camera(&pose, cam, &field, derive_seed(seed, 1000 + steps as u64));
        let (seg, err) = detect_row(&img, &env_config.detector)?;
        errors.push(err.value);
        if let Some(a) = follower.act(seg.as_ref(), cam, env_config.v_x) {
            action = a;
        }
        let twist = body_twist_from_mode(SteeringMode::Symmetric4ws, action, env_config.v_x, &env_config.field.robot)
            .map_err(|e| EvalError::Invalid(e.to_string()))?;
        let next = integrate(pose, SteeringMode::Symmetric4ws, &twist, env_config.dt)?;
        path += next.position().dist(pose.position());
        pose = next;
        steps += 1;
        let off = (pose.y - rc.row_y(pose.x, phase)).abs();
        offsets.push(off);
        if pose.position().dist(goal) <= env_config.goal_radius {
            success = true;
            break;
        }
        if off > rc.lost_distance || pose.x > rc.length + 1.0 {
            break;
        }
    }
    let m = mean(errors.iter().copied()).unwrap_or(0.0);
    let var = mean(errors.iter().map(|e| (e - m).powi(2))).unwrap_or(0.0);
    Ok(RowTrial {
        seed,
        success,
        steps,
        path_length: path,
        time: steps as f64 * env_config.dt,
        mean_track_error: m,
        std_track_error: var.sqrt(),
        mean_row_offset: mean(offsets.into_iter()).unwrap_or(0.0),
    })
}

/// Runs `n_trials` row-following trials with random row phase and start
/// perturbation, using the front camera only and symmetric steering.
pub fn run_row_tracking(
    follower: &RowFollower,
    env_config: &EnvConfig,
    rc: &RowTrackingConfig,
    n_trials: usize,
    master_seed: u64,
) -> Result<(Vec<RowTrial>, RowSummary), EvalError> {
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| run_row_trial(follower, env_config, rc, super::nav::trial_seed(master_seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let ok = || trials.iter().filter(|t| t.success);
    let summary = RowSummary {
        n_trials,
        success_rate: if n_trials == 0 { 0.0 } else { ok().count() as f64 / n_trials as f64 },
        mean_path_length: mean(ok().map(|t| t.path_length)),
        mean_time: mean(ok().map(|t| t.time)),
        mean_track_error: mean(ok().map(|t| t.mean_track_error)),
        std_track_error: mean(ok().map(|t| t.std_track_error)),
    };
    Ok((trials, summary))
}
