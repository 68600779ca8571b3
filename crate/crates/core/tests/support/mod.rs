//! Reference implementations shared by the integration tests. Everything here
//! is written independently of the library code it checks.
#![allow(dead_code)]

use furrow_core::learner::{Mlp, Policy, RolloutBuffer};
use furrow_core::perception::{CameraModel, GrayImage, LineSegment, CROPPED_WIDTH, MAX_TRACK_ERROR};
use furrow_core::world::{FieldMap, Pose2D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_buffer(rng: &mut ChaCha8Rng, n: usize) -> RolloutBuffer {
    let mut b = RolloutBuffer::default();
    for _ in 0..n {
        let term = rng.random_bool(0.15);
        let trunc = !term && rng.random_bool(0.1);
        b.push(
            vec![rng.random_range(-1.0..1.0); 3],
            rng.random_range(-2.0..2.0),
            rng.random_range(-3.0..0.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-2.0..2.0),
            term,
            trunc,
            if trunc { rng.random_range(-5.0..5.0) } else { 0.0 },
        );
    }
    b.last_value = rng.random_range(-5.0..5.0);
    b
}

/// Direct double sum: A_t = sum_k (gamma lambda)^k delta_{t+k} up to the end
/// of t's episode or of the buffer.
pub fn gae_oracle(b: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = b.len();
    let delta = |t: usize| {
        let next = if b.terminated[t] {
            0.0
        } else if b.truncated[t] {
            b.truncation_values[t]
        } else if t + 1 == n {
            b.last_value
        } else {
            b.values[t + 1]
        };
        b.rewards[t] + gamma * next - b.values[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if b.terminated[k] || b.truncated[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// One-step TD error written out from the buffer fields.
pub fn td_oracle(b: &RolloutBuffer, t: usize, gamma: f64) -> f64 {
    let next = if b.terminated[t] {
        0.0
    } else if b.truncated[t] {
        b.truncation_values[t]
    } else if t + 1 == b.len() {
        b.last_value
    } else {
        b.values[t + 1]
    };
    b.rewards[t] + gamma * next - b.values[t]
}

pub fn toy_update_buffer(policy: &Policy, rng: &mut ChaCha8Rng, n: usize, dim: usize) -> RolloutBuffer {
    let mut b = RolloutBuffer::default();
    for _ in 0..n {
        let obs: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = policy.sample(&obs, rng);
        b.push(obs, s.u, s.log_prob, s.value, rng.random_range(-1.0..1.0), rng.random_bool(0.05), false, 0.0);
    }
    b.last_value = 0.0;
    furrow_core::learner::compute_gae(&mut b, 0.99, 0.95);
    b
}

/// Worst relative error between `grad` and central differences of `f`.
pub fn worst_fd_error(p0: &[f64], grad: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut q = p0.to_vec();
    for i in 0..p0.len() {
        q[i] = p0[i] + h;
        let up = f(&q);
        q[i] = p0[i] - h;
        let down = f(&q);
        q[i] = p0[i];
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Gradient check of `sum(c * mlp(x))` over every weight and bias.
pub fn mlp_fd_error(mlp: &Mlp, x: &[f64], c: &[f64]) -> f64 {
    let mut cache = Default::default();
    mlp.forward(x, &mut cache);
    let mut grad = vec![0.0; mlp.n_params()];
    mlp.backward(&cache, c, &mut grad);
    let mut probe = mlp.clone();
    worst_fd_error(&mlp.params(), &grad, 1e-6, |p| {
        probe.set_params(p);
        probe.eval(x).iter().zip(c).map(|(o, c)| o * c).sum()
    })
}

/// Standard (exhaustive) Hough transform: every edge pixel votes for every
/// angle bin; lines are accumulator cells that reach `threshold` and are
/// maximal in their 3x3 neighborhood. Returns `(rho, theta)` with
/// `x cos(theta) + y sin(theta) = rho`.
pub fn standard_hough(edges: &GrayImage, theta_res: f64, threshold: u32) -> Vec<(f64, f64)> {
    let n_theta = (std::f64::consts::PI / theta_res).round() as usize;
    let diag = ((edges.width * edges.width + edges.height * edges.height) as f64).sqrt().ceil() as i64;
    let n_rho = (2 * diag + 1) as usize;
    let mut acc = vec![0u32; n_theta * n_rho];
    for y in 0..edges.height {
        for x in 0..edges.width {
            if edges.get(x, y) == 0 {
                continue;
            }
            for k in 0..n_theta {
                let t = k as f64 * theta_res;
                let rho = x as f64 * t.cos() + y as f64 * t.sin();
                acc[k * n_rho + (rho.round() as i64 + diag) as usize] += 1;
            }
        }
    }
    let at = |k: i64, r: i64| -> u32 {
        // theta wraps to pi with rho negated
        let (k, r) = if k < 0 {
            (k + n_theta as i64, 2 * diag - r)
        } else if k >= n_theta as i64 {
            (k - n_theta as i64, 2 * diag - r)
        } else {
            (k, r)
        };
        if r < 0 || r >= n_rho as i64 {
            0
        } else {
            acc[k as usize * n_rho + r as usize]
        }
    };
    let mut lines = Vec::new();
    for k in 0..n_theta as i64 {
        for r in 0..n_rho as i64 {
            let v = at(k, r);
            if v < threshold {
                continue;
            }
            let mut is_max = true;
            for dk in -1..=1 {
                for dr in -1..=1 {
                    if (dk, dr) != (0, 0) && at(k + dk, r + dr) > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                lines.push(((r - diag) as f64, k as f64 * theta_res));
            }
        }
    }
    lines
}

/// Distance of an image point from the line `(rho, theta)`.
pub fn line_distance(p: [f64; 2], (rho, theta): (f64, f64)) -> f64 {
    (p[0] * theta.cos() + p[1] * theta.sin() - rho).abs()
}

/// A segment belongs to the oracle's set when some oracle line passes within
/// `tol` pixels of both its endpoints.
pub fn segment_on_oracle_line(seg: &LineSegment, lines: &[(f64, f64)], tol: f64) -> bool {
    lines
        .iter()
        .any(|&l| line_distance(seg.p0, l) <= tol && line_distance(seg.p1, l) <= tol)
}

/// Random single-pixel-wide line of length at least `min_len`.
pub fn random_line(rng: &mut ChaCha8Rng, w: usize, h: usize, min_len: f64) -> ((i64, i64), (i64, i64)) {
    loop {
        let a = (rng.random_range(0..w as i64), rng.random_range(0..h as i64));
        let b = (rng.random_range(0..w as i64), rng.random_range(0..h as i64));
        if (((b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)) as f64).sqrt() >= min_len {
            return (a, b);
        }
    }
}

pub fn line_angle_deg(a: (i64, i64), b: (i64, i64)) -> f64 {
    ((b.1 - a.1) as f64).atan2((b.0 - a.0) as f64).to_degrees().rem_euclid(180.0)
}

/// Sets a `fraction` of all pixels at random.
pub fn salt(img: &mut GrayImage, fraction: f64, rng: &mut ChaCha8Rng) {
    let n = (fraction * (img.width * img.height) as f64).round() as usize;
    for _ in 0..n {
        let (x, y) = (rng.random_range(0..img.width), rng.random_range(0..img.height));
        img.set(x, y, 255);
    }
}

/// Track error from field geometry: each row's centerline is clipped to the
/// part the camera sees, its ends are projected, and the error is the distance
/// of their midpoint from the crop center, nearest row first. Rows visible
/// over less than `min_visible` meters are ignored.
pub fn track_error_truth(pose: &Pose2D, cam: &CameraModel, field: &FieldMap, min_visible: f64) -> f64 {
    let crop0 = ((cam.image_width - CROPPED_WIDTH) / 2) as f64;
    let half = CROPPED_WIDTH as f64 / 2.0;
    let r = field.config.plant_radius;
    let mut best = MAX_TRACK_ERROR;
    for row in &field.rows {
        let ends: Vec<(f64, f64)> = [row.plant_centers[0], *row.plant_centers.last().unwrap()]
            .iter()
            .map(|&p| cam.to_camera(pose, p))
            .collect();
        let (a, b) = (ends[0], ends[1]);
        let dd = b.0 - a.0;
        if dd.abs() < 1e-6 {
            continue;
        }
        let lo = cam.forward_offset.max(a.0.min(b.0) - r);
        let hi = (cam.forward_offset + cam.view_length).min(a.0.max(b.0) + r);
        if hi - lo < min_visible {
            continue;
        }
        let y_at = |d: f64| a.1 + (d - a.0) / dd * (b.1 - a.1);
        let (u0, _) = cam.project(lo, y_at(lo));
        let (u1, _) = cam.project(hi, y_at(hi));
        let cx = 0.5 * (u0 + u1) - crop0;
        if (0.0..CROPPED_WIDTH as f64).contains(&cx) {
            best = best.min((half - cx).abs());
        }
    }
    best
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}
