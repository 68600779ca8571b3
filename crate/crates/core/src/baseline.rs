//! Skid-steer robot with a PD waypoint follower, the comparison baseline.

use crate::world::{wrap_angle, Point2, Pose2D};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("dt must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdGains {
    pub kp_lin: f64,
    pub kd_lin: f64,
    pub kp_ang: f64,
    pub kd_ang: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Heading error beyond which forward speed is held at zero.
    pub align_gate_deg: f64,
    /// Distance at which the final target counts as reached.
    pub stop_radius: f64,
    /// Distance at which an intermediate waypoint counts as passed.
    pub waypoint_radius: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp_lin: 1.0,
            kd_lin: 0.0,
            kp_ang: 2.0,
            kd_ang: 0.1,
            v_max: 1.0,
            omega_max: 1.5,
            align_gate_deg: 30.0,
            stop_radius: 0.3,
            waypoint_radius: 0.05,
        }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let g = [self.kp_lin, self.kd_lin, self.kp_ang, self.kd_ang, self.align_gate_deg, self.stop_radius, self.waypoint_radius];
        if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BaselineError::InvalidGains("gains must be non-negative".into()));
        }
        if !(self.v_max > 0.0 && self.omega_max > 0.0) {
            return Err(BaselineError::InvalidGains("caps must be positive".into()));
        }
        Ok(())
    }
}

/// Unicycle integration along the exact arc.
pub fn skid_steer_step(pose: Pose2D, v: f64, omega: f64, dt: f64) -> Result<Pose2D, BaselineError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(BaselineError::InvalidDt(dt));
    }
    if !(pose.is_finite() && v.is_finite() && omega.is_finite()) {
        return Err(BaselineError::NonFinite);
    }
    let dth = omega * dt;
    let (dx, dy) = if dth.abs() < 1e-9 {
        let h = pose.heading + 0.5 * dth;
        (v * dt * h.cos(), v * dt * h.sin())
    } else {
        let r = v / omega;
        let h1 = pose.heading + dth;
        (r * (h1.sin() - pose.heading.sin()), r * (pose.heading.cos() - h1.cos()))
    };
    Ok(Pose2D::new(pose.x + dx, pose.y + dy, pose.heading + dth))
}

/// Errors remembered between control ticks for the derivative terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PdState {
    pub heading_error: f64,
    pub distance: f64,
    pub primed: bool,
}

/// Returns `(v, omega)`. Rotates in place while the target is more than the
/// gate angle off the heading; both commands are zero inside the stop radius.
pub fn pd_control(pose: &Pose2D, target: Point2, gains: &PdGains, state: &mut PdState, dt: f64) -> (f64, f64) {
    let dist = pose.position().dist(target);
    let bearing = (target.y - pose.y).atan2(target.x - pose.x);
    let e = wrap_angle(bearing - pose.heading);
    let (de, dd) = if state.primed && dt > 0.0 {
        (wrap_angle(e - state.heading_error) / dt, (dist - state.distance) / dt)
    } else {
        (0.0, 0.0)
    };
    *state = PdState {
        heading_error: e,
        distance: dist,
        primed: true,
    };
    if dist <= gains.stop_radius {
        return (0.0, 0.0);
    }
    let omega = (gains.kp_ang * e + gains.kd_ang * de).clamp(-gains.omega_max, gains.omega_max);
    let v = if e.abs() > gains.align_gate_deg.to_radians() {
        0.0
    } else {
        (gains.kp_lin * dist + gains.kd_lin * dd).clamp(0.0, gains.v_max)
    };
    (v, omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_and_rotation() {
        let p = skid_steer_step(Pose2D::new(0.0, 0.0, 0.0), 1.0, 0.0, 2.0).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        let r = skid_steer_step(Pose2D::new(1.0, 1.0, 0.0), 0.0, PI / 2.0, 1.0).unwrap();
        assert!((r.x - 1.0).abs() < 1e-12 && (r.y - 1.0).abs() < 1e-12);
        assert!((r.heading - PI / 2.0).abs() < 1e-12);
        assert!(skid_steer_step(p, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn full_circle_closes() {
        let mut p = Pose2D::new(0.5, -0.2, 0.3);
        let n = 1000;
        let omega = 0.8;
        let dt = 2.0 * PI / omega / n as f64;
        for _ in 0..n {
            p = skid_steer_step(p, 1.2, omega, dt).unwrap();
        }
        assert!((p.x - 0.5).abs() < 1e-6 && (p.y + 0.2).abs() < 1e-6);
    }

    #[test]
    fn pd_behaviour() {
        let g = PdGains::default();
        let mut s = PdState::default();
        let ahead = pd_control(&Pose2D::new(0.0, 0.0, 0.0), Point2::new(2.0, 0.0), &g, &mut s, 0.1);
        assert!(ahead.0 > 0.0 && ahead.1.abs() < 1e-12);
        let mut s = PdState::default();
        let behind = pd_control(&Pose2D::new(0.0, 0.0, 0.0), Point2::new(-2.0, 0.1), &g, &mut s, 0.1);
        assert_eq!(behind.0, 0.0);
        assert!(behind.1.abs() > 0.0);
        let mut s = PdState::default();
        assert_eq!(pd_control(&Pose2D::new(0.0, 0.0, 0.0), Point2::new(0.2, 0.1), &g, &mut s, 0.1), (0.0, 0.0));
    }

    #[test]
    fn distance_decreases_once_aligned_and_caps_hold() {
        let g = PdGains::default();
        for i in 0..12 {
            for j in 0..6 {
                let h = i as f64 * PI / 6.0;
                let target = Point2::new(0.5 + j as f64, -1.0 + 0.4 * j as f64);
                let mut pose = Pose2D::new(0.0, 0.0, h);
                let mut s = PdState::default();
                let mut aligned = false;
                let mut last = f64::INFINITY;
                for _ in 0..2000 {
                    let (v, w) = pd_control(&pose, target, &g, &mut s, 0.05);
                    assert!(v >= 0.0 && v <= g.v_max && w.abs() <= g.omega_max);
                    if v == 0.0 && w == 0.0 {
                        break;
                    }
                    pose = skid_steer_step(pose, v, w, 0.05).unwrap();
                    let d = pose.position().dist(target);
                    aligned |= s.heading_error.abs() < 0.05;
                    if aligned {
                        assert!(d < last, "heading {h} target {target:?}");
                    }
                    last = d;
                }
                assert!(pose.position().dist(target) <= g.stop_radius + 1e-9);
            }
        }
    }
}
