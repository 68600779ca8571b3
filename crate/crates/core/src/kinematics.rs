//! Closed-form wheel kinematics for a four-wheel independently steered,
//! independently driven chassis.
//!
//! Wheels are numbered 1 = front-right, 2 = front-left, 3 = rear-left,
//! 4 = rear-right. Body frame: `x` forward, `y` left, yaw positive
//! counter-clockwise. Steering angles are measured from the body `x` axis.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Zero-turn and lateral actions are rescaled by this factor before use.
pub const ACTION_RESCALE: f64 = 3.0;

/// Steering joints are limited to `[-STEER_LIMIT, STEER_LIMIT]`.
pub const STEER_LIMIT: f64 = FRAC_PI_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("v_x = 0 with nonzero yaw rate; use zero-turn steering")]
    ZeroSpeedTurn,
    #[error("wheel {wheel} steer angle {angle:.4} rad outside steering limits")]
    SteerLimit { wheel: usize, angle: f64 },
    #[error("degenerate command: {0}")]
    Degenerate(&'static str),
    #[error("action {0} outside [-1, 1]")]
    ActionOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, KinematicsError>;

/// Chassis dimensions. `track` is the lateral distance between left and right
/// wheels, `wheelbase` the longitudinal distance between front and rear axles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    pub wheelbase: f64,
    pub track: f64,
    pub wheel_radius: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            wheelbase: 0.3,
            track: 0.3,
            wheel_radius: 0.1,
        }
    }
}

impl RobotGeometry {
    pub fn new(wheelbase: f64, track: f64, wheel_radius: f64) -> Result<Self> {
        let geom = Self {
            wheelbase,
            track,
            wheel_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.wheelbase, "wheelbase"),
            (self.track, "track"),
            (self.wheel_radius, "wheel_radius"),
        ] {
            if !v.is_finite() {
                return Err(KinematicsError::NonFinite(name));
            }
            if v <= 0.0 {
                return Err(KinematicsError::InvalidGeometry(name));
            }
        }
        Ok(())
    }

    /// Half of the chassis diagonal; distance from the center to any wheel.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.wheelbase.hypot(self.track)
    }
}

/// Commanded body motion. Lateral body velocity is zero in this model except
/// in [`SteeringMode::Lateral`], which is carried separately by [`ModeTwist`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyTwist {
    pub v_x: f64,
    pub omega: f64,
}

/// Eight joint targets: four steering angles and four wheel angular velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelCommand {
    pub steer_angles: [f64; 4],
    pub wheel_omegas: [f64; 4],
}

impl WheelCommand {
    /// Joint values in publishing order: steering 1..4 then wheels 1..4.
    pub fn joints(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(&self.steer_angles);
        out[4..].copy_from_slice(&self.wheel_omegas);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SteeringMode {
    Symmetric4ws,
    ZeroTurn,
    Lateral,
}

impl SteeringMode {
    pub const ALL: [SteeringMode; 3] = [Self::Symmetric4ws, Self::ZeroTurn, Self::Lateral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Symmetric4ws => "symmetric_4ws",
            Self::ZeroTurn => "zero_turn",
            Self::Lateral => "lateral",
        }
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Symmetric four-wheel steering: front and rear pairs take equal and opposite
/// angles so that all wheel normals meet at one instantaneous center.
///
/// Wheel speeds carry the sign of `v_x`. Steering angles are the direction of
/// each wheel's ground velocity, resolved with `atan2` in the driving direction;
/// a wheel whose velocity opposes the body's driving direction (instantaneous
/// center between the wheels) cannot be reached within the steering limits and
/// is reported as [`KinematicsError::SteerLimit`].
pub fn symmetric_4ws(geom: &RobotGeometry, twist: BodyTwist) -> Result<WheelCommand> {
    geom.validate()?;
    if !twist.v_x.is_finite() {
        return Err(KinematicsError::NonFinite("v_x"));
    }
    if !twist.omega.is_finite() {
        return Err(KinematicsError::NonFinite("omega"));
    }
    if twist.v_x == 0.0 && twist.omega != 0.0 {
        return Err(KinematicsError::ZeroSpeedTurn);
    }

    let s = signum0(twist.v_x);
    let (l, t, r) = (geom.wheelbase, geom.track, geom.wheel_radius);
    let w = twist.omega;

    // Ground-velocity components for the right (1) and left (2) front wheels.
    let right = (twist.v_x + w * t / 2.0, w * l / 2.0);
    let left = (twist.v_x - w * t / 2.0, w * l / 2.0);

    let theta1 = (s * right.1).atan2(s * right.0);
    let theta2 = (s * left.1).atan2(s * left.0);
    for (wheel, angle) in [(1, theta1), (2, theta2)] {
        if angle.abs() > STEER_LIMIT {
            return Err(KinematicsError::SteerLimit { wheel, angle });
        }
    }

    let omega1 = s * right.0.hypot(right.1) / r;
    let omega2 = s * left.0.hypot(left.1) / r;

    Ok(WheelCommand {
        steer_angles: [theta1, theta2, -theta2, -theta1],
        wheel_omegas: [omega1, omega2, omega2, omega1],
    })
}

/// Zero-turn steering: wheels tangent to the circumscribed circle so the
/// chassis spins in place at yaw rate `omega`.
pub fn zero_turn(geom: &RobotGeometry, omega: f64) -> Result<WheelCommand> {
    geom.validate()?;
    if !omega.is_finite() {
        return Err(KinematicsError::NonFinite("omega"));
    }
    let angle = (geom.wheelbase / geom.track).atan();
    let speed = omega * geom.wheelbase.hypot(geom.track) / (2.0 * geom.wheel_radius);
    Ok(WheelCommand {
        steer_angles: [angle, -angle, angle, -angle],
        wheel_omegas: [speed, -speed, -speed, speed],
    })
}

/// Lateral steering: every wheel at +90 degrees, all spinning at `omega_wheel`.
/// Positive values move the robot toward its left.
pub fn lateral(omega_wheel: f64) -> Result<WheelCommand> {
    if !omega_wheel.is_finite() {
        return Err(KinematicsError::NonFinite("omega_wheel"));
    }
    Ok(WheelCommand {
        steer_angles: [FRAC_PI_2; 4],
        wheel_omegas: [omega_wheel; 4],
    })
}

/// Residual of the slip-free turning condition
/// `cot(outer) - cot(inner) = (w_f + w_r) / l` for a symmetric 4WS command,
/// with equal front and rear track `w_f = w_r = track`.
///
/// Angles are compared by magnitude, so the check holds for left and right
/// turns and for reverse driving alike.
pub fn check_kinematic_condition(cmd: &WheelCommand, geom: &RobotGeometry) -> Result<f64> {
    geom.validate()?;
    let (a, b) = (cmd.steer_angles[0], cmd.steer_angles[1]);
    if !a.is_finite() || !b.is_finite() {
        return Err(KinematicsError::NonFinite("steer_angles"));
    }
    if a == 0.0 || b == 0.0 {
        return Err(KinematicsError::Degenerate(
            "zero steer angle; straight-line motion has no turning center",
        ));
    }
    let cot_a = 1.0 / a.abs().tan();
    let cot_b = 1.0 / b.abs().tan();
    let (cot_outer, cot_inner) = if cot_a >= cot_b {
        (cot_a, cot_b)
    } else {
        (cot_b, cot_a)
    };
    let rhs = (geom.track + geom.track) / geom.wheelbase;
    Ok((cot_outer - cot_inner - rhs).abs())
}

/// Body motion produced by one policy action in a given steering mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeTwist {
    pub twist: BodyTwist,
    /// Sideways body velocity (m/s, positive toward the robot's left).
    pub v_lateral: f64,
}

/// Maps a normalized action in `[-1, 1]` to body motion.
///
/// * `Symmetric4ws`: forward speed `v_x_fixed` (sign chosen by the caller),
///   yaw rate equal to the raw action.
/// * `ZeroTurn`: yaw rate `3 * action`.
/// * `Lateral`: wheel rate `3 * action`, body speed `3 * action * R`.
pub fn body_twist_from_mode(
    mode: SteeringMode,
    action_omega: f64,
    v_x_fixed: f64,
    geom: &RobotGeometry,
) -> Result<ModeTwist> {
    if !action_omega.is_finite() {
        return Err(KinematicsError::NonFinite("action_omega"));
    }
    if !(-1.0..=1.0).contains(&action_omega) {
        return Err(KinematicsError::ActionOutOfRange(action_omega));
    }
    Ok(match mode {
        SteeringMode::Symmetric4ws => {
            if !v_x_fixed.is_finite() {
                return Err(KinematicsError::NonFinite("v_x_fixed"));
            }
            ModeTwist {
                twist: BodyTwist {
                    v_x: v_x_fixed,
                    omega: action_omega,
                },
                v_lateral: 0.0,
            }
        }
        SteeringMode::ZeroTurn => ModeTwist {
            twist: BodyTwist {
                v_x: 0.0,
                omega: ACTION_RESCALE * action_omega,
            },
            v_lateral: 0.0,
        },
        SteeringMode::Lateral => ModeTwist {
            twist: BodyTwist::default(),
            v_lateral: ACTION_RESCALE * action_omega * geom.wheel_radius,
        },
    })
}

/// Joint targets realizing `motion` in `mode`.
pub fn wheel_command(
    mode: SteeringMode,
    motion: &ModeTwist,
    geom: &RobotGeometry,
) -> Result<WheelCommand> {
    match mode {
        SteeringMode::Symmetric4ws => symmetric_4ws(geom, motion.twist),
        SteeringMode::ZeroTurn => zero_turn(geom, motion.twist.omega),
        SteeringMode::Lateral => lateral(motion.v_lateral / geom.wheel_radius),
    }
}
