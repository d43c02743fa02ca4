//! Global path search (8-connected A* over an inflated grid) and the moving
//! local waypoint extracted from the resulting path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::error::PlanError;
use crate::geometry::{ClearanceMap, OccupancyGrid, Pose2D, Vec2};

/// Robot radius plus safety margin used to inflate obstacles for planning.
pub const DEFAULT_INFLATION: f64 = 0.30;
/// Local waypoint lookahead along the path.
pub const DEFAULT_LOOKAHEAD: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPath {
    /// Dense polyline, consecutive points at most one cell apart.
    pub waypoints: Vec<Vec2>,
    /// Cumulative arc length at every waypoint.
    pub arc_length: Vec<f64>,
    pub total_length: f64,
    /// Straight and diagonal grid moves of the underlying cell path.
    pub straight_moves: usize,
    pub diagonal_moves: usize,
}

impl GlobalPath {
    pub fn from_polyline(vertices: &[Vec2], spacing: f64) -> Self {
        let mut waypoints = Vec::new();
        if let Some(&first) = vertices.first() {
            waypoints.push(first);
        }
        for pair in vertices.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let len = a.distance(b);
            let n = ((len / spacing).ceil() as usize).max(1);
            for k in 1..=n {
                waypoints.push(a + (b - a) * (k as f64 / n as f64));
            }
        }
        let mut arc_length = Vec::with_capacity(waypoints.len());
        let mut s = 0.0;
        for (i, p) in waypoints.iter().enumerate() {
            if i > 0 {
                s += p.distance(waypoints[i - 1]);
            }
            arc_length.push(s);
        }
        Self {
            waypoints,
            arc_length,
            total_length: s,
            straight_moves: 0,
            diagonal_moves: 0,
        }
    }

    /// Grid-move cost in cells, `straight + √2 · diagonal`.
    pub fn grid_cost(&self) -> f64 {
        self.straight_moves as f64 + SQRT_2 * self.diagonal_moves as f64
    }

    pub fn goal(&self) -> Vec2 {
        *self.waypoints.last().expect("path is never empty")
    }

    /// Index of the waypoint closest to `p` (first one on ties).
    pub fn nearest_index(&self, p: Vec2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.waypoints.iter().enumerate() {
            let d = w.distance(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.waypoints[0];
        }
        if s >= self.total_length {
            return self.goal();
        }
        let i = self.arc_length.partition_point(|&a| a <= s);
        let (s0, s1) = (self.arc_length[i - 1], self.arc_length[i]);
        let (a, b) = (self.waypoints[i - 1], self.waypoints[i]);
        if s1 - s0 <= 0.0 {
            return b;
        }
        a + (b - a) * ((s - s0) / (s1 - s0))
    }
}

/// Planning grid with obstacles inflated by a fixed radius.
#[derive(Debug, Clone)]
pub struct InflatedGrid {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
}

impl InflatedGrid {
    pub fn new(map: &ClearanceMap, inflation: f64) -> Self {
        let g = map.grid();
        let (w, h) = (g.width(), g.height());
        let mut blocked = vec![false; w * h];
        for iy in 0..h {
            for ix in 0..w {
                let c = g.cell_center(ix as i64, iy as i64);
                blocked[iy * w + ix] = g.is_occupied(ix as i64, iy as i64) || map.clearance(c) < inflation;
            }
        }
        Self {
            width: w,
            height: h,
            blocked,
        }
    }

    /// Wraps an explicit blocked mask (row-major).
    pub fn from_mask(width: usize, height: usize, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), width * height);
        Self {
            width,
            height,
            blocked,
        }
    }

    pub fn is_blocked(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            return true;
        }
        self.blocked[iy as usize * self.width + ix as usize]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

const MOVES: [(i64, i64); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    order: u64,
    cell: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then on insertion order.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: (i64, i64), b: (i64, i64)) -> f64 {
    let dx = (a.0 - b.0).abs() as f64;
    let dy = (a.1 - b.1).abs() as f64;
    dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
}

/// Shortest 8-connected cell path (unit / √2 costs, no corner cutting).
/// Returns the cell sequence from start to goal inclusive.
pub fn astar_cells(
    grid: &InflatedGrid,
    start: (i64, i64),
    goal: (i64, i64),
) -> Result<Vec<(i64, i64)>, PlanError> {
    let w = grid.width as i64;
    let idx = |c: (i64, i64)| (c.1 * w + c.0) as usize;
    let n = grid.width * grid.height;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut order = 0u64;

    g[idx(start)] = 0.0;
    open.push(OpenEntry {
        f: octile(start, goal),
        order,
        cell: idx(start),
    });

    while let Some(OpenEntry { cell, .. }) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        let c = (cell as i64 % w, cell as i64 / w);
        if c == goal {
            let mut path = vec![c];
            let mut cur = cell;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((cur as i64 % w, cur as i64 / w));
            }
            path.reverse();
            return Ok(path);
        }
        for &(dx, dy) in &MOVES {
            let nb = (c.0 + dx, c.1 + dy);
            if grid.is_blocked(nb.0, nb.1) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && (grid.is_blocked(c.0 + dx, c.1) || grid.is_blocked(c.0, c.1 + dy)) {
                continue;
            }
            let ni = idx(nb);
            if closed[ni] {
                continue;
            }
            let cand = g[cell] + if diagonal { SQRT_2 } else { 1.0 };
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = cell;
                order += 1;
                open.push(OpenEntry {
                    f: cand + octile(nb, goal),
                    order,
                    cell: ni,
                });
            }
        }
    }
    Err(PlanError::Unreachable)
}

/// Drops interior points that lie on a straight run.
pub fn remove_collinear(cells: &[(i64, i64)]) -> Vec<(i64, i64)> {
    if cells.len() <= 2 {
        return cells.to_vec();
    }
    let mut out = vec![cells[0]];
    for i in 1..cells.len() - 1 {
        let a = cells[i - 1];
        let b = cells[i];
        let c = cells[i + 1];
        if (b.0 - a.0, b.1 - a.1) != (c.0 - b.0, c.1 - b.1) {
            out.push(b);
        }
    }
    out.push(*cells.last().unwrap());
    out
}

/// Plans once over the inflated grid. The path starts at `start`, passes the
/// centers of the turning cells, and ends exactly at `goal`.
pub fn plan_global(
    map: &ClearanceMap,
    start: Vec2,
    goal: Vec2,
    inflation: f64,
) -> Result<GlobalPath, PlanError> {
    let inflated = InflatedGrid::new(map, inflation);
    plan_on(map.grid(), &inflated, start, goal)
}

pub fn plan_on(
    grid: &OccupancyGrid,
    inflated: &InflatedGrid,
    start: Vec2,
    goal: Vec2,
) -> Result<GlobalPath, PlanError> {
    let s = grid.cell_of(start);
    let g = grid.cell_of(goal);
    if inflated.is_blocked(s.0, s.1) {
        return Err(PlanError::StartBlocked(start.x, start.y));
    }
    if inflated.is_blocked(g.0, g.1) {
        return Err(PlanError::GoalBlocked(goal.x, goal.y));
    }
    let cells = astar_cells(inflated, s, g)?;
    let (mut straight, mut diagonal) = (0, 0);
    for pair in cells.windows(2) {
        if pair[0].0 != pair[1].0 && pair[0].1 != pair[1].1 {
            diagonal += 1;
        } else {
            straight += 1;
        }
    }
    let turns = remove_collinear(&cells);
    let mut vertices = Vec::with_capacity(turns.len() + 2);
    vertices.push(start);
    for &(ix, iy) in &turns[1..turns.len().saturating_sub(1).max(1)] {
        vertices.push(grid.cell_center(ix, iy));
    }
    vertices.push(goal);
    vertices.dedup();
    let mut path = GlobalPath::from_polyline(&vertices, grid.resolution());
    path.straight_moves = straight;
    path.diagonal_moves = diagonal;
    Ok(path)
}

/// Point `lookahead` meters further along the path than the waypoint nearest
/// to the robot; the goal itself once less than `lookahead` remains.
pub fn local_waypoint(path: &GlobalPath, robot: &Pose2D, lookahead: f64) -> Vec2 {
    let i = path.nearest_index(robot.position());
    path.point_at(path.arc_length[i] + lookahead)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_RESOLUTION;

    fn open_map(w: f64, h: f64) -> ClearanceMap {
        let g = OccupancyGrid::with_extent(Vec2::ZERO, Vec2::new(w, h), DEFAULT_RESOLUTION).unwrap();
        ClearanceMap::new(&g)
    }

    #[test]
    fn straight_path_in_free_space() {
        let map = open_map(12.0, 4.0);
        let start = Vec2::new(1.0, 2.0);
        let goal = Vec2::new(11.0, 2.0);
        let path = plan_global(&map, start, goal, DEFAULT_INFLATION).unwrap();
        assert!((path.total_length - 10.0).abs() <= DEFAULT_RESOLUTION);
        for pair in path.waypoints.windows(2) {
            assert!(pair[0].distance(pair[1]) <= DEFAULT_RESOLUTION * SQRT_2 + 1e-12);
        }
        assert_eq!(path.waypoints[0], start);
        assert_eq!(path.goal(), goal);
    }

    #[test]
    fn goal_in_obstacle_is_rejected() {
        let mut g = OccupancyGrid::with_extent(Vec2::ZERO, Vec2::new(6.0, 6.0), DEFAULT_RESOLUTION).unwrap();
        g.fill_rect(Vec2::new(3.0, 0.0), Vec2::new(0.5, 6.0));
        let map = ClearanceMap::new(&g);
        let err = plan_global(&map, Vec2::new(1.0, 3.0), Vec2::new(3.2, 3.0), DEFAULT_INFLATION);
        assert!(matches!(err, Err(PlanError::GoalBlocked(..))));
        let err = plan_global(&map, Vec2::new(1.0, 3.0), Vec2::new(5.0, 3.0), DEFAULT_INFLATION);
        assert_eq!(err, Err(PlanError::Unreachable));
    }

    #[test]
    fn path_avoids_inflated_cells() {
        let mut g = OccupancyGrid::with_extent(Vec2::ZERO, Vec2::new(8.0, 6.0), DEFAULT_RESOLUTION).unwrap();
        g.fill_rect(Vec2::new(3.5, 0.0), Vec2::new(0.4, 4.5));
        let map = ClearanceMap::new(&g);
        let path = plan_global(&map, Vec2::new(1.0, 1.0), Vec2::new(7.0, 1.0), DEFAULT_INFLATION).unwrap();
        for w in &path.waypoints[1..path.waypoints.len() - 1] {
            assert!(map.clearance(*w) >= DEFAULT_INFLATION - DEFAULT_RESOLUTION, "{w:?}");
        }
        assert!(path.waypoints.iter().any(|w| w.y > 4.5));
    }

    #[test]
    fn local_waypoint_examples() {
        let path = GlobalPath::from_polyline(&[Vec2::ZERO, Vec2::new(10.0, 0.0)], 0.05);
        let wp = local_waypoint(&path, &Pose2D::new(0.0, 0.0, 0.0), 2.0);
        assert!((wp.x - 2.0).abs() < 1e-9 && wp.y.abs() < 1e-12);
        let wp = local_waypoint(&path, &Pose2D::new(9.0, 0.0, 0.0), 2.0);
        assert_eq!(wp, Vec2::new(10.0, 0.0));
        let off = local_waypoint(&path, &Pose2D::new(3.0, 0.5, 1.0), 2.0);
        let on = local_waypoint(&path, &Pose2D::new(3.0, 0.0, 0.0), 2.0);
        assert_eq!(off, on);
    }

    #[test]
    fn local_waypoint_monotone_under_progress() {
        let path = GlobalPath::from_polyline(
            &[Vec2::ZERO, Vec2::new(4.0, 0.0), Vec2::new(4.0, 4.0), Vec2::new(8.0, 6.0)],
            0.05,
        );
        let mut last_s = -1.0;
        for k in 0..=200 {
            let s = path.total_length * k as f64 / 200.0;
            let p = path.point_at(s);
            let wp = local_waypoint(&path, &Pose2D::new(p.x, p.y + 0.1, 0.0), 2.0);
            let ws = path.arc_length[path.nearest_index(wp)];
            assert!(ws + 0.05 >= last_s);
            last_s = ws;
        }
    }
}
