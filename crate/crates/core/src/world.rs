//! Field layout, episode sampling and planar pose integration.
//!
//! Field frame: rows run along `+x`, the field is centered on the origin.
//! The waypoint grid places its lines on corridor centerlines (between rows
//! and outside the outer rows) and its columns at multiples of the pitch.

use crate::kinematics::{ModeTwist, RobotGeometry, SteeringMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid field config: {0}")]
    InvalidConfig(String),
    #[error("rows {0} and {1} overlap")]
    OverlappingRows(usize, usize),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    InvalidDt(f64),
    #[error("no valid {0} found after {1} draws")]
    SamplingExhausted(&'static str, usize),
}

pub type Result<T> = std::result::Result<T, WorldError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-pi, pi]`.
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Expresses a field-frame point in this pose's body frame.
    pub fn to_body(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p.x - self.x, p.y - self.y);
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn half_extents(&self) -> (f64, f64) {
        (
            0.5 * (self.max.x - self.min.x),
            0.5 * (self.max.y - self.min.y),
        )
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    /// Manhattan length of the diagonal.
    pub fn manhattan_diagonal(&self) -> f64 {
        (self.max.x - self.min.x) + (self.max.y - self.min.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub n_rows: usize,
    pub plants_per_row: usize,
    pub row_spacing: f64,
    pub plant_spacing: f64,
    pub plant_radius: f64,
    pub jitter_max_deg: f64,
    /// Grid columns beyond the crop section on each side.
    pub headland_columns: usize,
    /// Minimum gap between the crop envelope and a headland column centre.
    pub headland_clearance: f64,
    pub robot: RobotGeometry,
    /// Added to the chassis half diagonal to form the collision disc.
    pub collision_margin: f64,
    /// Extra clearance required of sampled start positions.
    pub spawn_margin: f64,
    /// Smallest Manhattan distance between a start cell and its goal.
    pub min_goal_distance: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            n_rows: 5,
            plants_per_row: 8,
            row_spacing: 1.0,
            plant_spacing: 0.75,
            plant_radius: 0.15,
            jitter_max_deg: 1.0,
            headland_columns: 2,
            headland_clearance: 0.3,
            robot: RobotGeometry::default(),
            collision_margin: 0.02,
            spawn_margin: 0.03,
            min_goal_distance: 3.0,
        }
    }
}

impl FieldConfig {
    /// Three rows of five plants; the desk-scale training field.
    pub fn reduced() -> Self {
        Self {
            n_rows: 3,
            plants_per_row: 5,
            plant_spacing: 0.6,
            ..Self::default()
        }
    }

    pub fn footprint_radius(&self) -> f64 {
        self.robot.half_diagonal() + self.collision_margin
    }

    /// Center distance below which robot and plant discs intersect.
    pub fn collision_distance(&self) -> f64 {
        self.footprint_radius() + self.plant_radius
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if self.n_rows == 0 || self.plants_per_row == 0 {
            return bad("row and plant counts must be positive");
        }
        for (v, name) in [
            (self.row_spacing, "row_spacing"),
            (self.plant_spacing, "plant_spacing"),
            (self.plant_radius, "plant_radius"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.jitter_max_deg.is_finite() && (0.0..45.0).contains(&self.jitter_max_deg)) {
            return bad("jitter_max_deg must lie in [0, 45)");
        }
        if !(self.collision_margin >= 0.0 && self.spawn_margin >= 0.0 && self.headland_clearance >= 0.0) {
            return bad("margins must be non-negative");
        }
        self.robot
            .validate()
            .map_err(|e| WorldError::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRow {
    pub center: Point2,
    pub plant_centers: Vec<Point2>,
    /// Unit vector along the (jittered) row.
    pub axis: Point2,
    pub orientation_jitter: f64,
}

impl CropRow {
    pub fn new(center: Point2, jitter: f64, n_plants: usize, spacing: f64) -> Self {
        let (s, c) = jitter.sin_cos();
        let plant_centers = (0..n_plants)
            .map(|k| {
                let u = (k as f64 - (n_plants as f64 - 1.0) / 2.0) * spacing;
                Point2::new(center.x + u * c, center.y + u * s)
            })
            .collect();
        Self {
            center,
            plant_centers,
            axis: Point2::new(c, s),
            orientation_jitter: jitter,
        }
    }
}

/// Grid cell index: column along the rows, line across them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub line: usize,
}

/// Waypoint lattice derived from a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub pitch: f64,
    /// Column x coordinates.
    pub xs: Vec<f64>,
    /// Corridor centerline y coordinates.
    pub ys: Vec<f64>,
    /// Columns inside the crop section, where cross-row moves are forbidden.
    pub crop_columns: Vec<bool>,
    /// Cells whose center collides with a plant.
    pub blocked: Vec<bool>,
}

impl GridLayout {
    pub fn n_cols(&self) -> usize {
        self.xs.len()
    }

    pub fn n_lines(&self) -> usize {
        self.ys.len()
    }

    pub fn index(&self, c: Cell) -> usize {
        c.line * self.n_cols() + c.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell {
            col: index % self.n_cols(),
            line: index / self.n_cols(),
        }
    }

    pub fn center(&self, c: Cell) -> Point2 {
        Point2::new(self.xs[c.col], self.ys[c.line])
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.blocked[self.index(c)]
    }

    pub fn is_crop(&self, c: Cell) -> bool {
        self.crop_columns[c.col]
    }

    /// Nearest cell center to `p`, clamped to the lattice.
    pub fn snap(&self, p: Point2) -> Cell {
        let nearest = |vals: &[f64], v: f64| {
            let mut best = 0;
            for (i, &x) in vals.iter().enumerate() {
                if (x - v).abs() < (vals[best] - v).abs() {
                    best = i;
                }
            }
            best
        };
        Cell {
            col: nearest(&self.xs, p.x),
            line: nearest(&self.ys, p.y),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_lines())
            .flat_map(move |line| (0..self.n_cols()).map(move |col| Cell { col, line }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub config: FieldConfig,
    pub rows: Vec<CropRow>,
    pub row_spacing: f64,
    pub plant_spacing: f64,
    pub bounds: Rect,
    pub grid_pitch: f64,
    pub grid: GridLayout,
    /// Furthest extent of the crop section along the row axis (absolute x).
    pub crop_half_length: f64,
}

impl FieldMap {
    /// Builds a field from explicit rows (used by generation and by tests that
    /// need hand-placed plants).
    pub fn from_rows(config: FieldConfig, rows: Vec<CropRow>) -> Result<Self> {
        config.validate()?;
        let pitch = config.row_spacing;
        let plant_r = config.plant_radius;
        let clear = config.collision_distance();

        let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut x_extent: f64 = 0.0;
        for row in &rows {
            y_lo = y_lo.min(row.center.y);
            y_hi = y_hi.max(row.center.y);
            for p in &row.plant_centers {
                x_extent = x_extent.max(p.x.abs());
            }
        }
        if rows.is_empty() {
            y_lo = 0.0;
            y_hi = 0.0;
        }
        let crop_half_length = x_extent + plant_r;

        let n_lines = ((y_hi - y_lo) / pitch).round() as usize + 2;
        let ys: Vec<f64> = (0..n_lines)
            .map(|j| y_lo - pitch / 2.0 + j as f64 * pitch)
            .collect();

        // Columns closer to the crop than a collision-free lateral pass are crop columns.
        let crop_reach = if rows.is_empty() {
            -1.0
        } else {
            x_extent + clear + config.headland_clearance
        };
        let last_crop = if crop_reach < 0.0 {
            -1
        } else {
            (crop_reach / pitch).ceil() as i64 - 1
        };
        let n_half = last_crop + config.headland_columns as i64;
        let xs: Vec<f64> = (-n_half..=n_half).map(|i| i as f64 * pitch).collect();
        let crop_columns = xs.iter().map(|x| x.abs() < crop_reach).collect();

        let bounds = Rect {
            min: Point2::new(xs[0] - pitch / 2.0, ys[0] - pitch / 2.0),
            max: Point2::new(
                xs[xs.len() - 1] + pitch / 2.0,
                ys[ys.len() - 1] + pitch / 2.0,
            ),
        };

        let mut field = Self {
            row_spacing: config.row_spacing,
            plant_spacing: config.plant_spacing,
            config,
            rows,
            bounds,
            grid_pitch: pitch,
            grid: GridLayout {
                pitch,
                xs,
                ys,
                crop_columns,
                blocked: Vec::new(),
            },
            crop_half_length,
        };
        let blocked = field
            .grid
            .cells()
            .map(|c| field.point_collides(field.grid.center(c)))
            .collect();
        field.grid.blocked = blocked;
        Ok(field)
    }

    pub fn plants(&self) -> impl Iterator<Item = Point2> + '_ {
        self.rows.iter().flat_map(|r| r.plant_centers.iter().copied())
    }

    pub fn plant_count(&self) -> usize {
        self.rows.iter().map(|r| r.plant_centers.len()).sum()
    }

    /// Manhattan diagonal of the field bounds; normalizer for distances.
    pub fn md_max(&self) -> f64 {
        self.bounds.manhattan_diagonal()
    }

    /// True when `p` lies inside the crop section (between the first and last
    /// plant along the rows, including the clearance band around them).
    pub fn in_crop_section(&self, p: Point2) -> bool {
        let reach = self.crop_half_length + self.config.footprint_radius();
        let (y_lo, y_hi) = (self.grid.ys[0], self.grid.ys[self.grid.ys.len() - 1]);
        !self.rows.is_empty() && p.x.abs() < reach && p.y > y_lo - 0.5 * self.grid_pitch && p.y < y_hi + 0.5 * self.grid_pitch
    }

    fn point_collides(&self, p: Point2) -> bool {
        let clear = self.config.collision_distance();
        self.plants().any(|q| q.dist(p) < clear)
    }

    /// Smallest distance from `p` to any plant center.
    pub fn nearest_plant_distance(&self, p: Point2) -> f64 {
        self.plants().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Builds the crop field: `n_rows` rows of `plants_per_row` plants, each row
/// rotated about its center by an independent uniform jitter.
pub fn generate_field(seed: u64, config: &FieldConfig) -> Result<FieldMap> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter_max = config.jitter_max_deg.to_radians();
    let n = config.n_rows;
    let rows: Vec<CropRow> = (0..n)
        .map(|i| {
            let y = (i as f64 - (n as f64 - 1.0) / 2.0) * config.row_spacing;
            let jitter = if jitter_max > 0.0 {
                rng.random_range(-jitter_max..=jitter_max)
            } else {
                0.0
            };
            CropRow::new(
                Point2::new(0.0, y),
                jitter,
                config.plants_per_row,
                config.plant_spacing,
            )
        })
        .collect();

    for i in 1..rows.len() {
        let min_gap = rows[i - 1]
            .plant_centers
            .iter()
            .flat_map(|a| rows[i].plant_centers.iter().map(move |b| a.dist(*b)))
            .fold(f64::INFINITY, f64::min);
        if min_gap < 2.0 * config.plant_radius {
            return Err(WorldError::OverlappingRows(i - 1, i));
        }
    }
    FieldMap::from_rows(config.clone(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub start_pose: Pose2D,
    pub goal: Point2,
    pub rng_seed: u64,
}

const MAX_SAMPLE_DRAWS: usize = 10_000;

/// Samples a start pose in a corridor or headland cell and a goal on a
/// corridor cell inside the crop section.
///
/// Start positions are jittered around their cell center by up to a fifth of
/// the pitch along the rows and a tenth across; headings are aligned with the
/// rows (either direction) within five degrees.
pub fn sample_episode(field: &FieldMap, seed: u64) -> Result<EpisodeSetup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = &field.grid;
    let open: Vec<Cell> = grid.cells().filter(|c| !grid.is_blocked(*c)).collect();
    let goals: Vec<Cell> = open.iter().copied().filter(|c| grid.is_crop(*c)).collect();
    if open.len() < 2 || goals.is_empty() {
        return Err(WorldError::SamplingExhausted("cell", 0));
    }
    let clearance = field.config.collision_distance() + field.config.spawn_margin;
    let pitch = field.grid_pitch;

    for _ in 0..MAX_SAMPLE_DRAWS {
        let start_cell = open[rng.random_range(0..open.len())];
        let goal_cell = goals[rng.random_range(0..goals.len())];
        let jx = rng.random_range(-0.2..=0.2) * pitch;
        let jy = rng.random_range(-0.1..=0.1) * pitch;
        let base = if rng.random_bool(0.5) { 0.0 } else { PI };
        let heading = base + rng.random_range(-5.0f64..=5.0).to_radians();
        let c = grid.center(start_cell);
        let g = grid.center(goal_cell);
        if start_cell == goal_cell || (c.x - g.x).abs() + (c.y - g.y).abs() < field.config.min_goal_distance - 1e-9 {
            continue;
        }
        let start = Pose2D::new(c.x + jx, c.y + jy, heading);
        if field.nearest_plant_distance(start.position()) < clearance
            || !field.bounds.contains(start.position())
        {
            continue;
        }
        return Ok(EpisodeSetup {
            start_pose: start,
            goal: g,
            rng_seed: seed,
        });
    }
    Err(WorldError::SamplingExhausted("episode", MAX_SAMPLE_DRAWS))
}

/// `sin(u) / u`, continuous at zero.
fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Exact no-slip integration of a constant command over `dt`.
///
/// Symmetric steering follows a circular arc of radius `v_x / omega` (a line
/// when `omega = 0`); zero-turn rotates in place; lateral translates
/// perpendicular to the heading.
pub fn integrate(pose: Pose2D, mode: SteeringMode, motion: &ModeTwist, dt: f64) -> Result<Pose2D> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(WorldError::InvalidDt(dt));
    }
    if !pose.is_finite() {
        return Err(WorldError::NonFinite("pose"));
    }
    if !(motion.twist.v_x.is_finite() && motion.twist.omega.is_finite() && motion.v_lateral.is_finite()) {
        return Err(WorldError::NonFinite("twist"));
    }
    let h = pose.heading;
    Ok(match mode {
        SteeringMode::Symmetric4ws => {
            let phi = motion.twist.omega * dt;
            let chord = motion.twist.v_x * dt * sinc(phi / 2.0);
            let mid = h + phi / 2.0;
            Pose2D::new(pose.x + chord * mid.cos(), pose.y + chord * mid.sin(), h + phi)
        }
        SteeringMode::ZeroTurn => Pose2D::new(pose.x, pose.y, h + motion.twist.omega * dt),
        SteeringMode::Lateral => {
            let d = motion.v_lateral * dt;
            Pose2D {
                x: pose.x - d * h.sin(),
                y: pose.y + d * h.cos(),
                heading: h,
            }
        }
    })
}

/// True when the robot's footprint disc intersects any plant disc.
pub fn collision_check(pose: &Pose2D, field: &FieldMap) -> bool {
    field.point_collides(pose.position())
}
