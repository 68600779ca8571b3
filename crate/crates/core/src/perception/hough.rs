//! Progressive probabilistic Hough transform.
//!
//! Edge pixels are visited in random order and vote into a (ρ, θ)
//! accumulator. As soon as a cell reaches the vote threshold the detector
//! walks the corresponding line through the current pixel in both directions,
//! tolerating gaps of up to `max_gap` pixels. Walked pixels are removed from
//! the edge mask; when the walk is long enough to form a segment its pixels
//! also withdraw their votes.

use super::raster::GrayImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoughParams {
    pub rho_res: f64,
    /// Radians.
    pub theta_res: f64,
    pub vote_threshold: u32,
    pub min_len: f64,
    pub max_gap: u32,
    /// Restricts voting to lines within this many degrees of vertical.
    pub max_tilt_deg: Option<f64>,
    pub seed: u64,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self {
            rho_res: 1.0,
            theta_res: 1f64.to_radians(),
            vote_threshold: 20,
            min_len: 30.0,
            max_gap: 10,
            max_tilt_deg: None,
            seed: 0,
        }
    }
}

impl HoughParams {
    pub fn n_angles(&self) -> usize {
        (std::f64::consts::PI / self.theta_res).round() as usize
    }

    pub fn n_rho(&self, width: usize, height: usize) -> usize {
        (((width + height) * 2 + 1) as f64 / self.rho_res).round() as usize
    }

    /// Angle bins that take part in voting. A vertical line has normal angle 0.
    pub fn active_angles(&self) -> Vec<usize> {
        let n = self.n_angles();
        match self.max_tilt_deg {
            None => (0..n).collect(),
            Some(tilt) => (0..n)
                .filter(|&k| {
                    let t = (k as f64 * self.theta_res).to_degrees();
                    t.min(180.0 - t) <= tilt + 1e-9
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub center_x: f64,
}

impl LineSegment {
    pub fn new(p0: [f64; 2], p1: [f64; 2]) -> Self {
        Self {
            p0,
            p1,
            center_x: 0.5 * (p0[0] + p1[0]),
        }
    }

    pub fn length(&self) -> f64 {
        (self.p1[0] - self.p0[0]).hypot(self.p1[1] - self.p0[1])
    }

    /// Undirected direction in degrees, `[0, 180)`.
    pub fn angle_deg(&self) -> f64 {
        let a = (self.p1[1] - self.p0[1])
            .atan2(self.p1[0] - self.p0[0])
            .to_degrees();
        a.rem_euclid(180.0)
    }

    /// Absolute angle to the image's vertical axis, `[0, 90]`.
    pub fn tilt_from_vertical_deg(&self) -> f64 {
        (self.angle_deg() - 90.0).abs()
    }

    /// Endpoints ordered top to bottom.
    pub fn top_down(&self) -> ([f64; 2], [f64; 2]) {
        if self.p0[1] <= self.p1[1] {
            (self.p0, self.p1)
        } else {
            (self.p1, self.p0)
        }
    }
}

/// Angle between two undirected directions given in degrees.
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Cosine and sine tables scaled by `1 / rho_res`.
pub(crate) fn trig_tables(p: &HoughParams) -> Vec<(f64, f64)> {
    (0..p.n_angles())
        .map(|n| {
            let t = n as f64 * p.theta_res;
            (t.cos() / p.rho_res, t.sin() / p.rho_res)
        })
        .collect()
}

/// Detects line segments in a binary edge image (nonzero = edge).
pub fn hough_probabilistic(edges: &GrayImage, p: &HoughParams) -> Vec<LineSegment> {
    const SHIFT: u32 = 16;
    const FIX: u32 = 12;
    let (w, h) = (edges.width, edges.height);
    let n_rho = p.n_rho(w, h);
    let tab = trig_tables(p);
    let active = p.active_angles();
    let offset = (n_rho as i64 - 1) / 2;
    let na = active.len();
    // fixed-point x*cos and y*sin, one row of active angles per coordinate
    let fix = |v: f64| (v * (1u32 << FIX) as f64).round() as i64;
    let table = |len: usize, trig: fn(&(f64, f64)) -> f64| -> Vec<i64> {
        (0..len)
            .flat_map(|i| active.iter().map(move |&n| (i, n)))
            .map(|(i, n)| fix(i as f64 * trig(&tab[n])))
            .collect()
    };
    let xtab = table(w, |t| t.0);
    let ytab = table(h, |t| t.1);
    let mut accum = vec![0u32; na * n_rho];
    let mut mask: Vec<bool> = edges.data.iter().map(|&v| v != 0).collect();

    let mut points: Vec<(i64, i64)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] {
                points.push((x as i64, y as i64));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    points.shuffle(&mut rng);

    let round_half = 1i64 << (FIX - 1);
    // adds `delta` votes for (x, y) across all active angles; returns the
    // strongest updated angle bin above `floor`
    let vote = |accum: &mut [u32], x: i64, y: i64, delta: i32, floor: u32| -> Option<(usize, u32)> {
        let xr = &xtab[x as usize * na..][..na];
        let yr = &ytab[y as usize * na..][..na];
        let mut best = None;
        let mut max_val = floor;
        for (a, (cell_row, (&xv, &yv))) in accum.chunks_exact_mut(n_rho).zip(xr.iter().zip(yr)).enumerate() {
            let bin = (((xv + yv + round_half) >> FIX) + offset) as usize;
            let cell = &mut cell_row[bin];
            *cell = cell.saturating_add_signed(delta);
            if *cell > max_val {
                max_val = *cell;
                best = Some((a, max_val));
            }
        }
        best
    };

    let mut segments = Vec::new();
    for &(px, py) in &points {
        if !mask[py as usize * w + px as usize] {
            continue;
        }
        let Some((max_a, _)) = vote(&mut accum, px, py, 1, p.vote_threshold.saturating_sub(1)) else {
            continue;
        };
        let max_n = active[max_a];

        // Direction along the line is perpendicular to the normal (cos, sin).
        let a = -tab[max_n].1;
        let b = tab[max_n].0;
        let half = 1i64 << (SHIFT - 1);
        let (xflag, dx0, dy0, x0, y0) = if a.abs() > b.abs() {
            let dy = (b * (1i64 << SHIFT) as f64 / a.abs()).round() as i64;
            (true, a.signum() as i64, dy, px, (py << SHIFT) + half)
        } else {
            let dx = (a * (1i64 << SHIFT) as f64 / b.abs()).round() as i64;
            (false, dx, b.signum() as i64, (px << SHIFT) + half, py)
        };
        let to_pixel = |x: i64, y: i64| {
            if xflag {
                (x, y >> SHIFT)
            } else {
                (x >> SHIFT, y)
            }
        };
        let inside = |(x, y): (i64, i64)| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h;

        let mut ends = [(px, py); 2];
        for (k, end) in ends.iter_mut().enumerate() {
            let (dx, dy) = if k == 0 { (dx0, dy0) } else { (-dx0, -dy0) };
            let (mut x, mut y) = (x0, y0);
            let mut gap = 0;
            loop {
                let q = to_pixel(x, y);
                if !inside(q) {
                    break;
                }
                if mask[q.1 as usize * w + q.0 as usize] {
                    gap = 0;
                    *end = q;
                } else {
                    gap += 1;
                    if gap > p.max_gap {
                        break;
                    }
                }
                x += dx;
                y += dy;
            }
        }

        let (ex, ey) = (
            (ends[1].0 - ends[0].0) as f64,
            (ends[1].1 - ends[0].1) as f64,
        );
        let good = ex.abs() >= p.min_len || ey.abs() >= p.min_len;

        for (k, end) in ends.iter().enumerate() {
            let (dx, dy) = if k == 0 { (dx0, dy0) } else { (-dx0, -dy0) };
            let (mut x, mut y) = (x0, y0);
            loop {
                let q = to_pixel(x, y);
                let idx = q.1 as usize * w + q.0 as usize;
                if mask[idx] {
                    if good {
                        vote(&mut accum, q.0, q.1, -1, u32::MAX);
                    }
                    mask[idx] = false;
                }
                if q == *end {
                    break;
                }
                x += dx;
                y += dy;
            }
        }

        if good {
            segments.push(LineSegment::new(
                [ends[0].0 as f64, ends[0].1 as f64],
                [ends[1].0 as f64, ends[1].1 as f64],
            ));
        }
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_image(a: (i64, i64), b: (i64, i64)) -> GrayImage {
        let mut img = GrayImage::new(160, 160);
        img.draw_line(a, b, 255);
        img
    }

    #[test]
    fn empty_image_has_no_segments() {
        assert!(hough_probabilistic(&GrayImage::new(50, 40), &HoughParams::default()).is_empty());
    }

    #[test]
    fn vertical_line_is_one_segment() {
        let segs = hough_probabilistic(&line_image((70, 20), (70, 119)), &HoughParams::default());
        assert_eq!(segs.len(), 1);
        let s = segs[0];
        assert_eq!(s.angle_deg(), 90.0);
        assert!((s.length() - 99.0).abs() < 1e-9);
        assert_eq!(s.center_x, 70.0);
    }

    #[test]
    fn diagonal_line_angle_within_resolution() {
        let segs = hough_probabilistic(&line_image((10, 30), (110, 80)), &HoughParams::default());
        assert_eq!(segs.len(), 1);
        let truth = (50.0f64).atan2(100.0).to_degrees();
        assert!(angle_diff_deg(segs[0].angle_deg(), truth) <= 1.0);
    }

    #[test]
    fn short_lines_and_gaps() {
        let p = HoughParams::default();
        assert!(hough_probabilistic(&line_image((5, 5), (5, 25)), &p).is_empty());

        let mut img = GrayImage::new(100, 180);
        img.draw_line((50, 0), (50, 79), 255);
        img.draw_line((50, 100), (50, 179), 255);
        let split = hough_probabilistic(&img, &p);
        assert_eq!(split.len(), 2);
        let bridged = hough_probabilistic(&img, &HoughParams { max_gap: 25, ..p });
        assert_eq!(bridged.len(), 1);
        assert!((bridged[0].length() - 179.0).abs() < 1e-9);
    }

    #[test]
    fn same_seed_is_reproducible() {
        let img = line_image((30, 10), (40, 140));
        let a = hough_probabilistic(&img, &HoughParams { seed: 1, ..HoughParams::default() });
        let b = hough_probabilistic(&img, &HoughParams { seed: 1, ..HoughParams::default() });
        assert_eq!(a, b);
    }
}
