//! Uniform-cost search over the waypoint lattice.
//!
//! Moves go one cell along the rows anywhere, or one cell across the rows
//! only between two headland cells. Every move costs one pitch, so path cost
//! is a Manhattan length.

use crate::world::{Cell, FieldMap, GridLayout, Point2};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("{0} lies outside the field")]
    OutOfBounds(&'static str),
    #[error("{0} cell is blocked by plants")]
    Blocked(&'static str),
    #[error("goal is unreachable from start")]
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Cells from start to goal inclusive.
    pub cells: Vec<Cell>,
    /// Cell centers after the start cell; the last one is the goal.
    pub waypoints: Vec<Point2>,
    /// Manhattan length in metres.
    pub cost: f64,
}

pub fn manhattan(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).abs() + (a.y - b.y).abs()
}

/// Planned waypoints with per-waypoint visit flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub waypoints: Vec<Point2>,
    pub visited: Vec<bool>,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<Point2>) -> Self {
        let visited = vec![false; waypoints.len()];
        Self { waypoints, visited }
    }

    pub fn n_wp(&self) -> usize {
        self.waypoints.len()
    }

    pub fn n_visited(&self) -> usize {
        self.visited.iter().filter(|v| **v).count()
    }

    /// Unvisited waypoint with the smallest Manhattan distance to `p`;
    /// earlier waypoints win ties. `None` once every waypoint is visited.
    pub fn nearest_unvisited(&self, p: Point2) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (w, seen)) in self.waypoints.iter().zip(&self.visited).enumerate() {
            if *seen {
                continue;
            }
            let d = manhattan(*w, p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    pub fn mark_visited(&mut self, i: usize) {
        self.visited[i] = true;
    }

    /// Sum of Manhattan lengths between consecutive waypoints, starting at `from`.
    pub fn manhattan_length(&self, from: Point2) -> f64 {
        let mut prev = from;
        let mut total = 0.0;
        for w in &self.waypoints {
            total += manhattan(prev, *w);
            prev = *w;
        }
        total
    }
}

/// Neighbors in expansion order: along the rows first, then across.
pub fn neighbors(grid: &GridLayout, c: Cell) -> Vec<Cell> {
    let mut out = Vec::with_capacity(4);
    if grid.is_blocked(c) {
        return out;
    }
    let mut push = |n: Cell, cross: bool| {
        if grid.is_blocked(n) {
            return;
        }
        if cross && (grid.is_crop(c) || grid.is_crop(n)) {
            return;
        }
        out.push(n);
    };
    if c.col > 0 {
        push(Cell { col: c.col - 1, ..c }, false);
    }
    if c.col + 1 < grid.n_cols() {
        push(Cell { col: c.col + 1, ..c }, false);
    }
    if c.line > 0 {
        push(Cell { line: c.line - 1, ..c }, true);
    }
    if c.line + 1 < grid.n_lines() {
        push(Cell { line: c.line + 1, ..c }, true);
    }
    out
}

pub fn plan_cells(grid: &GridLayout, start: Cell, goal: Cell) -> Result<Vec<Cell>, PlannerError> {
    if grid.is_blocked(start) {
        return Err(PlannerError::Blocked("start"));
    }
    if grid.is_blocked(goal) {
        return Err(PlannerError::Blocked("goal"));
    }
    let n = grid.n_cols() * grid.n_lines();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let s = grid.index(start);
    dist[s] = 0;
    heap.push(Reverse((0usize, s)));
    let g = grid.index(goal);

    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        if i == g {
            break;
        }
        for nb in neighbors(grid, grid.cell_at(i)) {
            let j = grid.index(nb);
            if d + 1 < dist[j] {
                dist[j] = d + 1;
                parent[j] = i;
                heap.push(Reverse((d + 1, j)));
            }
        }
    }
    if dist[g] == usize::MAX {
        return Err(PlannerError::Unreachable);
    }
    let mut path = vec![goal];
    let mut i = g;
    while i != s {
        i = parent[i];
        path.push(grid.cell_at(i));
    }
    path.reverse();
    Ok(path)
}

/// Plans from the cell containing `start` to the cell containing `goal`.
pub fn plan_waypoints(field: &FieldMap, start: Point2, goal: Point2) -> Result<Plan, PlannerError> {
    if !field.bounds.contains(start) {
        return Err(PlannerError::OutOfBounds("start"));
    }
    if !field.bounds.contains(goal) {
        return Err(PlannerError::OutOfBounds("goal"));
    }
    let grid = &field.grid;
    let cells = plan_cells(grid, grid.snap(start), grid.snap(goal))?;
    let waypoints = cells.iter().skip(1).map(|c| grid.center(*c)).collect();
    Ok(Plan {
        cost: (cells.len() - 1) as f64 * grid.pitch,
        cells,
        waypoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_field, sample_episode, FieldConfig};

    /// Exhaustive search over simple paths with an increasing depth bound.
    fn brute_force_len(grid: &GridLayout, start: Cell, goal: Cell) -> Option<usize> {
        fn dfs(grid: &GridLayout, c: Cell, goal: Cell, left: usize, seen: &mut Vec<bool>) -> bool {
            if c == goal {
                return true;
            }
            if left == 0 {
                return false;
            }
            for n in neighbors(grid, c) {
                let j = grid.index(n);
                if !seen[j] {
                    seen[j] = true;
                    let hit = dfs(grid, n, goal, left - 1, seen);
                    seen[j] = false;
                    if hit {
                        return true;
                    }
                }
            }
            false
        }
        let n = grid.n_cols() * grid.n_lines();
        (0..n).find(|&depth| {
            let mut seen = vec![false; n];
            seen[grid.index(start)] = true;
            dfs(grid, start, goal, depth, &mut seen)
        })
    }

    fn check_path_legal(grid: &GridLayout, cells: &[Cell]) {
        for w in cells.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dc = a.col.abs_diff(b.col);
            let dl = a.line.abs_diff(b.line);
            assert_eq!(dc + dl, 1, "non-adjacent step {a:?} -> {b:?}");
            if dl == 1 {
                assert!(!grid.is_crop(a) && !grid.is_crop(b), "cross-row move in crop section");
            }
            assert!(!grid.is_blocked(b));
        }
    }

    #[test]
    fn manhattan_basics() {
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(2.0, 3.0));
        assert_eq!(manhattan(a, b), 5.0);
        assert_eq!(manhattan(b, a), 5.0);
        assert!(manhattan(a, b) >= a.dist(b));
    }

    #[test]
    fn nearest_unvisited_rules() {
        let mut path = WaypointPath::new(vec![
            Point2::new(1.0, 0.0),
            Point2::new(-1.0, 0.0),
            Point2::new(0.0, 2.0),
        ]);
        assert_eq!(path.nearest_unvisited(Point2::new(-1.0, 0.0)), Some((1, 0.0)));
        // equidistant pair: earlier in path wins
        assert_eq!(path.nearest_unvisited(Point2::new(0.0, 0.0)), Some((0, 1.0)));
        path.mark_visited(0);
        assert_eq!(path.nearest_unvisited(Point2::new(0.0, 0.0)), Some((1, 1.0)));
        path.mark_visited(1);
        path.mark_visited(2);
        assert_eq!(path.nearest_unvisited(Point2::new(0.0, 0.0)), None);
    }

    #[test]
    fn nearest_unvisited_matches_linear_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let f = generate_field(6, &FieldConfig::default()).unwrap();
        for seed in 0..200 {
            let ep = sample_episode(&f, seed).unwrap();
            let plan = plan_waypoints(&f, ep.start_pose.position(), ep.goal).unwrap();
            let mut path = WaypointPath::new(plan.waypoints.clone());
            for i in 0..path.n_wp() {
                if rng.random_bool(0.3) {
                    path.mark_visited(i);
                }
            }
            let p = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0));
            let mut oracle: Option<(usize, f64)> = None;
            for i in 0..path.n_wp() {
                let d = (path.waypoints[i].x - p.x).abs() + (path.waypoints[i].y - p.y).abs();
                if !path.visited[i] && oracle.is_none_or(|(_, od)| d < od) {
                    oracle = Some((i, d));
                }
            }
            assert_eq!(path.nearest_unvisited(p), oracle);
        }
    }

    #[test]
    fn matches_exhaustive_search_on_reduced_field() {
        let f = generate_field(4, &FieldConfig::reduced()).unwrap();
        assert_eq!(f.grid.n_cols() * f.grid.n_lines(), 28);
        let g = &f.grid;
        for s in g.cells() {
            for t in g.cells() {
                let ours = plan_cells(g, s, t).map(|p| p.len() - 1).ok();
                assert_eq!(ours, brute_force_len(g, s, t), "{s:?} -> {t:?}");
            }
        }
    }

    #[test]
    fn sampled_episodes_plan_legally() {
        let f = generate_field(9, &FieldConfig::default()).unwrap();
        for seed in 0..500 {
            let ep = sample_episode(&f, seed).unwrap();
            let plan = plan_waypoints(&f, ep.start_pose.position(), ep.goal).unwrap();
            check_path_legal(&f.grid, &plan.cells);
            assert_eq!(*plan.waypoints.last().unwrap(), ep.goal);
            assert_eq!(plan.waypoints.len(), plan.cells.len() - 1);
            // path can never be shorter than the Manhattan distance between cell centers
            let a = f.grid.center(plan.cells[0]);
            assert!(plan.cost + 1e-9 >= (a.x - ep.goal.x).abs() + (a.y - ep.goal.y).abs());
        }
    }

    #[test]
    fn same_corridor_goes_straight() {
        let f = generate_field(2, &FieldConfig::reduced()).unwrap();
        let plan = plan_waypoints(&f, Point2::new(-1.0, 0.5), Point2::new(1.0, 0.5)).unwrap();
        assert_eq!(plan.waypoints, vec![Point2::new(0.0, 0.5), Point2::new(1.0, 0.5)]);
        assert_eq!(plan.cost, 2.0);
    }

    #[test]
    fn changing_corridor_detours_through_headland() {
        let f = generate_field(2, &FieldConfig::reduced()).unwrap();
        let plan = plan_waypoints(&f, Point2::new(1.0, -0.5), Point2::new(1.0, 0.5)).unwrap();
        // crop section spans |x| <= 1, nearest headland column is x = 2
        assert_eq!(plan.cost, 3.0);
        check_path_legal(&f.grid, &plan.cells);
        assert_eq!(plan.waypoints[0], Point2::new(2.0, -0.5));
    }

    #[test]
    fn deterministic_and_errors() {
        let f = generate_field(2, &FieldConfig::reduced()).unwrap();
        let a = plan_waypoints(&f, Point2::new(-3.0, -1.5), Point2::new(0.0, 1.5)).unwrap();
        let b = plan_waypoints(&f, Point2::new(-3.0, -1.5), Point2::new(0.0, 1.5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            plan_waypoints(&f, Point2::new(50.0, 0.0), Point2::new(0.0, 0.5)),
            Err(PlannerError::OutOfBounds("start"))
        );
        let mut g = f.grid.clone();
        let wall: Vec<usize> = (0..g.n_lines()).map(|l| g.index(Cell { col: 5, line: l })).collect();
        for i in wall {
            g.blocked[i] = true;
        }
        assert_eq!(
            plan_cells(&g, Cell { col: 6, line: 0 }, Cell { col: 0, line: 0 }),
            Err(PlannerError::Unreachable)
        );
    }
}
