//! Synthetic row cameras and the crop-row detection pipeline.
//!
//! Each camera sees a trapezoid of ground in front of (or behind) the robot.
//! The ground-to-image map is a homography: image columns are proportional to
//! lateral offset divided by the local trapezoid width, and image rows are
//! affine in the reciprocal of the distance to the trapezoid's apex, so
//! straight crop rows render as straight image lines.

pub mod hough;
pub mod raster;

pub use hough::{angle_diff_deg, hough_probabilistic, HoughParams, LineSegment};
pub use raster::{GrayImage, RasterImage};

use crate::world::{FieldMap, Point2, Pose2D};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("image {0}x{1} is smaller than the {2}-pixel crop")]
    TooSmall(usize, usize, usize),
    #[error("writing stage image: {0}")]
    Io(#[from] image::ImageError),
}

pub const CROPPED_WIDTH: usize = 240;
/// Error reported when no row is detected: half the cropped width.
pub const MAX_TRACK_ERROR: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CameraMount {
    Front,
    Rear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub mount: CameraMount,
    pub image_width: usize,
    pub image_height: usize,
    pub cropped_width: usize,
    /// Distance from the robot center to the near edge of the view.
    pub forward_offset: f64,
    pub view_length: f64,
    /// Ground width spanned by the full image at the near edge.
    pub near_width: f64,
    /// Ground width spanned by the full image at the far edge.
    pub far_width: f64,
}

impl CameraModel {
    pub fn new(mount: CameraMount) -> Self {
        Self {
            mount,
            image_width: 320,
            image_height: 240,
            cropped_width: CROPPED_WIDTH,
            forward_offset: 0.3,
            view_length: 2.4,
            near_width: 3.6,
            far_width: 6.0,
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: &str| Err(PerceptionError::InvalidCamera(m.to_string()));
        if self.cropped_width != CROPPED_WIDTH || self.image_width < self.cropped_width {
            return bad("cropped width must be 240 and fit in the image");
        }
        if self.image_height == 0 {
            return bad("image height must be positive");
        }
        if !(self.forward_offset >= 0.0 && self.view_length > 0.0 && self.near_width > 0.0) {
            return bad("view offsets and widths must be positive");
        }
        if !(self.far_width > self.near_width) {
            return bad("far width must exceed near width");
        }
        Ok(())
    }

    /// Distance behind the near edge at which the trapezoid's sides meet.
    fn apex(&self) -> f64 {
        let spread = (self.far_width - self.near_width) / self.view_length;
        self.forward_offset - self.near_width / spread
    }

    fn spread(&self) -> f64 {
        (self.far_width - self.near_width) / self.view_length
    }

    /// Reciprocal depths of the far and near edges relative to the apex.
    fn inv_depth_range(&self) -> (f64, f64) {
        let a = self.apex();
        (
            1.0 / (self.forward_offset + self.view_length - a),
            1.0 / (self.forward_offset - a),
        )
    }

    /// Ground distance along the camera axis seen by image row coordinate `v`
    /// (`0` = top = far edge, `image_height` = bottom = near edge).
    pub fn row_distance(&self, v: f64) -> f64 {
        let (s_far, s_near) = self.inv_depth_range();
        let s = s_far + (s_near - s_far) * v / self.image_height as f64;
        self.apex() + 1.0 / s
    }

    /// Image row coordinate of ground distance `d`.
    pub fn distance_row(&self, d: f64) -> f64 {
        let (s_far, s_near) = self.inv_depth_range();
        let s = 1.0 / (d - self.apex());
        (s - s_far) / (s_near - s_far) * self.image_height as f64
    }

    /// Pixels per metre of lateral offset at distance `d`.
    fn lateral_scale(&self, d: f64) -> f64 {
        self.image_width as f64 / (self.spread() * (d - self.apex()))
    }

    /// Projects a camera-frame ground point (`d` along the view axis, `y` to
    /// the camera's left) to full-image pixel coordinates.
    pub fn project(&self, d: f64, y: f64) -> (f64, f64) {
        let u = 0.5 * self.image_width as f64 - y * self.lateral_scale(d);
        (u, self.distance_row(d))
    }

    /// Inverse of [`CameraModel::project`].
    pub fn unproject(&self, u: f64, v: f64) -> (f64, f64) {
        let d = self.row_distance(v);
        (d, (0.5 * self.image_width as f64 - u) / self.lateral_scale(d))
    }

    /// Maps a field point into the camera frame `(d, y)`.
    pub fn to_camera(&self, pose: &Pose2D, p: Point2) -> (f64, f64) {
        let b = pose.to_body(p);
        match self.mount {
            CameraMount::Front => (b.x, b.y),
            CameraMount::Rear => (-b.x, -b.y),
        }
    }

    /// Maps a camera-frame ground point back to the field.
    pub fn to_field(&self, pose: &Pose2D, d: f64, y: f64) -> Point2 {
        let (bx, by) = match self.mount {
            CameraMount::Front => (d, y),
            CameraMount::Rear => (-d, -y),
        };
        let (s, c) = pose.heading.sin_cos();
        Point2::new(pose.x + c * bx - s * by, pose.y + s * bx + c * by)
    }

    /// Field-frame corners of the viewed ground region: near-left, near-right,
    /// far-right, far-left.
    pub fn footprint(&self, pose: &Pose2D) -> [Point2; 4] {
        let near = self.forward_offset;
        let far = near + self.view_length;
        [
            self.to_field(pose, near, 0.5 * self.near_width),
            self.to_field(pose, near, -0.5 * self.near_width),
            self.to_field(pose, far, -0.5 * self.far_width),
            self.to_field(pose, far, 0.5 * self.far_width),
        ]
    }
}

const PLANT_GREEN: [u8; 3] = [46, 150, 52];

/// Small sequential generator for per-pixel texture noise.
struct Grain(u64);

impl Grain {
    fn new(seed: u64, pose: &Pose2D) -> Self {
        let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
        for v in [pose.x.to_bits(), pose.y.to_bits(), pose.heading.to_bits()] {
            h ^= v;
            h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            h ^= h >> 31;
        }
        Grain(h | 1)
    }

    #[inline]
    fn next(&mut self, modulo: u64) -> u8 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        ((self.0 >> 32) % modulo) as u8
    }
}

/// Renders the camera's view: soil texture with plants as filled green discs.
pub fn render_camera(pose: &Pose2D, camera: &CameraModel, field: &FieldMap, seed: u64) -> RasterImage {
    let (w, h) = (camera.image_width, camera.image_height);
    let mut img = RasterImage::filled(w, h, [0, 0, 0]);
    let mut grain = Grain::new(seed, pose);
    let r = field.config.plant_radius;
    let near = camera.forward_offset;
    let far = near + camera.view_length;
    let reach = 0.5 * camera.far_width + r;
    let plants: Vec<(f64, f64)> = field
        .plants()
        .map(|p| camera.to_camera(pose, p))
        .filter(|&(d, y)| d > near - r && d < far + r && y.abs() < reach)
        .collect();

    let cu = 0.5 * w as f64;
    for v in 0..h {
        let row = &mut img.pixels[3 * v * w..3 * (v + 1) * w];
        for px in row.chunks_exact_mut(3) {
            let n = grain.next(31);
            px.copy_from_slice(&[112 + n, 82 + n / 2, 52 + n / 3]);
        }
        let d = camera.row_distance(v as f64 + 0.5);
        let scale = camera.lateral_scale(d);
        for &(pd, py) in &plants {
            let dd = pd - d;
            if dd.abs() >= r {
                continue;
            }
            let half = (r * r - dd * dd).sqrt();
            // pixel centers u + 0.5 inside [a, b]
            let a = (cu - (py + half) * scale - 0.5).ceil().max(0.0);
            let b = (cu - (py - half) * scale - 0.5).floor().min(w as f64 - 1.0);
            if a > b {
                continue;
            }
            for u in a as usize..=b as usize {
                let n = grain.next(17);
                row[3 * u..3 * u + 3].copy_from_slice(&[
                    PLANT_GREEN[0] - 8 + n,
                    PLANT_GREEN[1] - 8 + n,
                    PLANT_GREEN[2] - 8 + n,
                ]);
            }
        }
    }
    img
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Accepted hue window in degrees.
    pub hue_min: f64,
    pub hue_max: f64,
    pub saturation_min: f64,
    pub value_min: f64,
    pub gray_threshold: u8,
    /// Minimum Sobel magnitude for an edge pixel.
    pub edge_threshold: i32,
    pub hough: HoughParams,
    /// Segments tilted further than this from vertical are ignored.
    pub max_tilt_deg: f64,
    /// Segments whose centers lie within this distance belong to one row.
    pub cluster_px: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hue_min: 70.0,
            hue_max: 170.0,
            saturation_min: 0.35,
            value_min: 0.15,
            gray_threshold: 1,
            edge_threshold: 255,
            hough: HoughParams {
                vote_threshold: 15,
                max_gap: 80,
                max_tilt_deg: Some(30.0),
                ..HoughParams::default()
            },
            max_tilt_deg: 30.0,
            cluster_px: 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackError {
    pub value: f64,
    pub detected: bool,
}

impl TrackError {
    pub const NONE: TrackError = TrackError {
        value: MAX_TRACK_ERROR,
        detected: false,
    };

    /// `center_x` is a column index; pixel `i` covers `[i, i + 1)`.
    fn from_center(center_x: f64) -> Self {
        Self {
            value: (MAX_TRACK_ERROR - (center_x + 0.5)).abs().min(MAX_TRACK_ERROR),
            detected: true,
        }
    }
}

/// Intermediate images of one pipeline run, in processing order.
#[derive(Debug, Clone)]
pub struct PipelineStages {
    pub cropped: RasterImage,
    pub mask: GrayImage,
    pub gray: GrayImage,
    pub binary: GrayImage,
    pub edges: GrayImage,
    pub segments: Vec<LineSegment>,
    pub selected: Option<LineSegment>,
}

impl PipelineStages {
    pub fn track_error(&self) -> TrackError {
        self.selected
            .map(|s| TrackError::from_center(s.center_x))
            .unwrap_or(TrackError::NONE)
    }

    /// Writes `<prefix>_<stage>.png` for every stage into `dir`.
    pub fn dump(&self, dir: &Path, prefix: &str) -> Result<(), PerceptionError> {
        std::fs::create_dir_all(dir).map_err(|e| PerceptionError::Io(image::ImageError::IoError(e)))?;
        let name = |stage: &str| dir.join(format!("{prefix}_{stage}.png"));
        self.cropped.save_png(&name("crop"))?;
        self.mask.save_png(&name("mask"))?;
        self.gray.save_png(&name("gray"))?;
        self.binary.save_png(&name("binary"))?;
        self.edges.save_png(&name("edges"))?;

        let mut overlay = self.edges.clone();
        for s in &self.segments {
            overlay.draw_line(px(s.p0), px(s.p1), 128);
        }
        if let Some(s) = &self.selected {
            overlay.draw_line(px(s.p0), px(s.p1), 200);
        }
        overlay.save_png(&name("lines"))?;
        Ok(())
    }
}

fn px(p: [f64; 2]) -> (i64, i64) {
    (p[0].round() as i64, p[1].round() as i64)
}

/// Hue in degrees, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

fn green_mask(img: &RasterImage, cfg: &DetectorConfig) -> GrayImage {
    let mut out = GrayImage::new(img.width, img.height);
    let v_floor = cfg.value_min * 255.0;
    // hues in [60, 180] all have green as the dominant channel
    let green_dominant = cfg.hue_min >= 60.0 && cfg.hue_max <= 180.0;
    for (o, px) in out.data.iter_mut().zip(img.pixels.chunks_exact(3)) {
        let rgb = [px[0], px[1], px[2]];
        if green_dominant && (rgb[1] < rgb[0] || rgb[1] < rgb[2]) {
            continue;
        }
        let max = rgb.iter().max().copied().unwrap_or(0) as f64;
        let min = rgb.iter().min().copied().unwrap_or(0) as f64;
        if max < v_floor || max - min < cfg.saturation_min * max || max == min {
            continue;
        }
        let (hue, _, _) = rgb_to_hsv(rgb);
        if hue >= cfg.hue_min && hue <= cfg.hue_max {
            *o = 255;
        }
    }
    out
}

fn masked_gray(img: &RasterImage, mask: &GrayImage) -> GrayImage {
    let mut out = GrayImage::new(img.width, img.height);
    for ((o, &m), px) in out.data.iter_mut().zip(&mask.data).zip(img.pixels.chunks_exact(3)) {
        if m != 0 {
            let luma = (299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32) / 1000;
            *o = luma.max(1) as u8;
        }
    }
    out
}

fn threshold(gray: &GrayImage, t: u8) -> GrayImage {
    GrayImage {
        width: gray.width,
        height: gray.height,
        data: gray.data.iter().map(|&v| if v >= t { 255 } else { 0 }).collect(),
    }
}

/// Sobel gradient magnitude (L1), thinned to the bright side of each
/// transition so a binary step yields a one-pixel edge that mirrors with the
/// image. Borders replicate the outermost pixels.
pub fn sobel_edges(img: &GrayImage, min_mag: i32) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        let up = &img.data[y.saturating_sub(1) * w..][..w];
        let mid = &img.data[y * w..][..w];
        let down = &img.data[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            if mid[x] < 128 {
                continue;
            }
            let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let p = |row: &[u8], i: usize| row[i] as i32;
            let sx = p(up, r) + 2 * p(mid, r) + p(down, r) - p(up, l) - 2 * p(mid, l) - p(down, l);
            let sy = p(down, l) + 2 * p(down, x) + p(down, r) - p(up, l) - 2 * p(up, x) - p(up, r);
            if sx.abs() + sy.abs() >= min_mag.max(1) {
                out.data[y * w + x] = 255;
            }
        }
    }
    out
}

/// Groups near-vertical segments into rows and returns the row closest to
/// the image center as a midline segment.
fn select_row(segments: &[LineSegment], cfg: &DetectorConfig, center: f64) -> Option<LineSegment> {
    let mut candidates: Vec<&LineSegment> = segments
        .iter()
        .filter(|s| s.tilt_from_vertical_deg() <= cfg.max_tilt_deg)
        .collect();
    candidates.sort_by(|a, b| a.center_x.total_cmp(&b.center_x));

    let mut best: Option<(f64, f64, LineSegment)> = None;
    let mut i = 0;
    while i < candidates.len() {
        let mut j = i + 1;
        while j < candidates.len() && candidates[j].center_x - candidates[j - 1].center_x <= cfg.cluster_px {
            j += 1;
        }
        let (lo, hi) = (candidates[i], candidates[j - 1]);
        let (lt, lb) = lo.top_down();
        let (ht, hb) = hi.top_down();
        let mid = LineSegment::new(
            [0.5 * (lt[0] + ht[0]), 0.5 * (lt[1] + ht[1])],
            [0.5 * (lb[0] + hb[0]), 0.5 * (lb[1] + hb[1])],
        );
        let support: f64 = candidates[i..j].iter().map(|s| s.length()).sum();
        let dist = (mid.center_x - center).abs();
        let better = match &best {
            None => true,
            Some((bd, bs, _)) => dist < *bd || (dist == *bd && support > *bs),
        };
        if better {
            best = Some((dist, support, mid));
        }
        i = j;
    }
    best.map(|(_, _, s)| s)
}

/// Runs the full pipeline and keeps every intermediate image.
pub fn detect_row_stages(img: &RasterImage, cfg: &DetectorConfig) -> Result<PipelineStages, PerceptionError> {
    if img.width < CROPPED_WIDTH || img.height == 0 {
        return Err(PerceptionError::TooSmall(img.width, img.height, CROPPED_WIDTH));
    }
    let cropped = img.crop_columns((img.width - CROPPED_WIDTH) / 2, CROPPED_WIDTH);
    let mask = green_mask(&cropped, cfg);
    let gray = masked_gray(&cropped, &mask);
    let binary = threshold(&gray, cfg.gray_threshold);
    let edges = sobel_edges(&binary, cfg.edge_threshold);
    let segments = hough_probabilistic(&edges, &cfg.hough);
    let selected = select_row(&segments, cfg, MAX_TRACK_ERROR - 0.5);
    Ok(PipelineStages {
        cropped,
        mask,
        gray,
        binary,
        edges,
        segments,
        selected,
    })
}

/// Detects the crop row nearest the image center and its track error.
pub fn detect_row(img: &RasterImage, cfg: &DetectorConfig) -> Result<(Option<LineSegment>, TrackError), PerceptionError> {
    let stages = detect_row_stages(img, cfg)?;
    Ok((stages.selected, stages.track_error()))
}

/// Draws a vertical green band of width `band` centered at full-image column `cx`.
pub fn synthetic_band(width: usize, height: usize, cx: f64, band: f64) -> RasterImage {
    let mut img = RasterImage::filled(width, height, [120, 90, 60]);
    for y in 0..height {
        for x in 0..width {
            let xc = x as f64 + 0.5;
            if (xc - cx).abs() <= band / 2.0 {
                img.set(x, y, PLANT_GREEN);
            }
        }
    }
    img
}
