//! Planar geometry, binary occupancy grids and ray casting.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Number of simulated LiDAR beams, evenly spread over a full turn.
pub const LIDAR_RAYS: usize = 36;
/// LiDAR saturation distance in meters.
pub const LIDAR_MAX_RANGE: f64 = 3.0;
/// Default occupancy grid resolution in meters per cell.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or `None` for (near) zero length.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn left_normal(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Signed angle rotating `self` onto `o`, in (−π, π].
    pub fn angle_to(self, o: Vec2) -> f64 {
        wrap_angle(self.cross(o).atan2(self.dot(o)))
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Normalizes an angle into (−π, π].
pub fn normalize_angle(a: f64) -> Result<f64, GeometryError> {
    if !a.is_finite() {
        return Err(GeometryError::NonFiniteAngle(a));
    }
    Ok(wrap_angle(a))
}

/// Infallible variant of [`normalize_angle`] for values already known to be
/// finite. Non-finite input is passed through unchanged.
pub fn wrap_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    if a > -PI && a <= PI {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    // Odd multiples of π land within a few ulps of the boundary; they map to +π.
    if (r - PI).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
        return PI;
    }
    if r > PI {
        r -= two_pi;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::from_polar(1.0, self.theta)
    }

    /// `self ⊕ other`: `other` expressed in this pose's frame, mapped to the world.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let p = self.position() + other.position().rotated(self.theta);
        Pose2D::new(p.x, p.y, self.theta + other.theta)
    }

    /// World point expressed in this pose's frame.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position()).rotated(-self.theta)
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        self.position() + p.rotated(self.theta)
    }

    /// Bearing of a world point relative to the heading, in (−π, π].
    pub fn bearing_to(&self, p: Vec2) -> f64 {
        let d = p - self.position();
        wrap_angle(d.y.atan2(d.x) - self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub w: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, w: 0.0 };

    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    /// Clamps to `v ∈ [0, v_max]`, `|w| ≤ w_max`.
    pub fn clamped(self, v_max: f64, w_max: f64) -> Self {
        Self {
            v: self.v.clamp(0.0, v_max),
            w: self.w.clamp(-w_max, w_max),
        }
    }
}

/// Binary occupancy grid. Cell `(ix, iy)` covers
/// `[ox + ix·res, ox + (ix+1)·res) × [oy + iy·res, oy + (iy+1)·res)`.
/// Anything outside the grid reads as occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    width: usize,
    height: usize,
    origin: Pose2D,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Vec2,
    ) -> Result<Self, GeometryError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GeometryError::BadResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyGrid);
        }
        Ok(Self {
            resolution,
            width,
            height,
            origin: Pose2D::new(origin.x, origin.y, 0.0),
            cells: vec![false; width * height],
        })
    }

    /// Grid covering `[origin, origin + extent]` at the given resolution.
    pub fn with_extent(origin: Vec2, extent: Vec2, resolution: f64) -> Result<Self, GeometryError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GeometryError::BadResolution(resolution));
        }
        let w = (extent.x / resolution - 1e-9).ceil().max(0.0) as usize;
        let h = (extent.y / resolution - 1e-9).ceil().max(0.0) as usize;
        Self::new(w, h, resolution, origin)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    /// World-space size of the grid.
    pub fn extent(&self) -> Vec2 {
        Vec2::new(
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cell_of(&self, p: Vec2) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn in_bounds(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (ix, iy) = self.cell_of(p);
        self.in_bounds(ix, iy)
    }

    pub fn cell_center(&self, ix: i64, iy: i64) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_occupied(&self, ix: i64, iy: i64) -> bool {
        if !self.in_bounds(ix, iy) {
            return true;
        }
        self.cells[iy as usize * self.width + ix as usize]
    }

    pub fn occupied_at(&self, p: Vec2) -> bool {
        let (ix, iy) = self.cell_of(p);
        self.is_occupied(ix, iy)
    }

    pub fn set(&mut self, ix: i64, iy: i64, occupied: bool) {
        if self.in_bounds(ix, iy) {
            let w = self.width;
            self.cells[iy as usize * w + ix as usize] = occupied;
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Marks every cell whose center lies inside the axis-aligned rectangle.
    pub fn fill_rect(&mut self, corner: Vec2, size: Vec2) {
        let (x0, x1) = (corner.x.min(corner.x + size.x), corner.x.max(corner.x + size.x));
        let (y0, y1) = (corner.y.min(corner.y + size.y), corner.y.max(corner.y + size.y));
        let (ix0, iy0) = self.cell_of(Vec2::new(x0, y0));
        let (ix1, iy1) = self.cell_of(Vec2::new(x1, y1));
        for iy in iy0.max(0)..=iy1.min(self.height as i64 - 1) {
            for ix in ix0.max(0)..=ix1.min(self.width as i64 - 1) {
                let c = self.cell_center(ix, iy);
                if c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1 {
                    self.set(ix, iy, true);
                }
            }
        }
    }

    /// Marks every cell whose center lies within `thickness / 2` of the segment.
    pub fn fill_segment(&mut self, a: Vec2, b: Vec2, thickness: f64) {
        let half = 0.5 * thickness.max(self.resolution);
        let lo = Vec2::new(a.x.min(b.x) - half, a.y.min(b.y) - half);
        let hi = Vec2::new(a.x.max(b.x) + half, a.y.max(b.y) + half);
        let (ix0, iy0) = self.cell_of(lo);
        let (ix1, iy1) = self.cell_of(hi);
        for iy in iy0.max(0)..=iy1.min(self.height as i64 - 1) {
            for ix in ix0.max(0)..=ix1.min(self.width as i64 - 1) {
                if point_segment_distance(self.cell_center(ix, iy), a, b) <= half {
                    self.set(ix, iy, true);
                }
            }
        }
    }

    /// Distance from `p` to the closest point of the cell box `(ix, iy)`.
    pub fn distance_to_cell(&self, p: Vec2, ix: i64, iy: i64) -> f64 {
        self.closest_point_in_cell(p, ix, iy).distance(p)
    }

    pub fn closest_point_in_cell(&self, p: Vec2, ix: i64, iy: i64) -> Vec2 {
        let x0 = self.origin.x + ix as f64 * self.resolution;
        let y0 = self.origin.y + iy as f64 * self.resolution;
        Vec2::new(
            p.x.clamp(x0, x0 + self.resolution),
            p.y.clamp(y0, y0 + self.resolution),
        )
    }

    /// True when some occupied cell (or the out-of-bounds region) comes
    /// strictly closer than `radius` to `p`. Exhaustive over the covered cells.
    pub fn disc_collides(&self, p: Vec2, radius: f64) -> bool {
        let (ix0, iy0) = self.cell_of(Vec2::new(p.x - radius, p.y - radius));
        let (ix1, iy1) = self.cell_of(Vec2::new(p.x + radius, p.y + radius));
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                if self.is_occupied(ix, iy) && self.distance_to_cell(p, ix, iy) < radius {
                    return true;
                }
            }
        }
        false
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance along a ray to the first occupied cell, walking every crossed cell
/// in order. `angle` is relative to `origin.theta`. The result is clamped to
/// `max_range`; an occupied (or out-of-bounds) origin cell yields 0.
pub fn raycast(grid: &OccupancyGrid, origin: &Pose2D, angle: f64, max_range: f64) -> f64 {
    let start = origin.position();
    let (mut ix, mut iy) = grid.cell_of(start);
    if grid.is_occupied(ix, iy) {
        return 0.0;
    }
    if max_range <= 0.0 {
        return max_range.max(0.0);
    }
    let dir = Vec2::from_polar(1.0, origin.theta + angle);
    let res = grid.resolution;
    let ox = grid.origin.x;
    let oy = grid.origin.y;

    let (step_x, mut t_max_x, t_delta_x) = if dir.x > 0.0 {
        (1, ((ix + 1) as f64 * res + ox - start.x) / dir.x, res / dir.x)
    } else if dir.x < 0.0 {
        (-1, (ix as f64 * res + ox - start.x) / dir.x, -res / dir.x)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    };
    let (step_y, mut t_max_y, t_delta_y) = if dir.y > 0.0 {
        (1, ((iy + 1) as f64 * res + oy - start.y) / dir.y, res / dir.y)
    } else if dir.y < 0.0 {
        (-1, (iy as f64 * res + oy - start.y) / dir.y, -res / dir.y)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    };

    loop {
        let t = if t_max_x <= t_max_y {
            ix += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            iy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t >= max_range {
            return max_range;
        }
        if grid.is_occupied(ix, iy) {
            return t.max(0.0);
        }
    }
}

/// Beam angles (relative to heading) of the simulated LiDAR.
pub fn lidar_angles() -> impl Iterator<Item = f64> {
    (0..LIDAR_RAYS).map(|i| i as f64 * 2.0 * PI / LIDAR_RAYS as f64)
}

/// Full static scan from `pose`, clamped at [`LIDAR_MAX_RANGE`].
pub fn scan_grid(grid: &OccupancyGrid, pose: &Pose2D) -> [f64; LIDAR_RAYS] {
    let mut out = [LIDAR_MAX_RANGE; LIDAR_RAYS];
    for (r, a) in out.iter_mut().zip(lidar_angles()) {
        *r = raycast(grid, pose, a, LIDAR_MAX_RANGE);
    }
    out
}

/// Minimum of the 36-beam static scan taken at `p`.
pub fn min_obstacle_distance(grid: &OccupancyGrid, p: Vec2) -> f64 {
    scan_grid(grid, &Pose2D::new(p.x, p.y, 0.0))
        .into_iter()
        .fold(LIDAR_MAX_RANGE, f64::min)
}

/// Nearest-occupied-cell lookup table built with an exact separable
/// Euclidean distance transform. The grid is padded by one occupied ring so
/// the out-of-bounds region acts as a wall.
#[derive(Debug, Clone)]
pub struct ClearanceMap {
    grid: OccupancyGrid,
    // Padded dimensions.
    pw: usize,
    ph: usize,
    // Nearest occupied cell (padded coordinates) for every padded cell.
    nearest: Vec<(u32, u32)>,
}

impl ClearanceMap {
    pub fn new(grid: &OccupancyGrid) -> Self {
        let pw = grid.width + 2;
        let ph = grid.height + 2;
        let occupied = |px: usize, py: usize| grid.is_occupied(px as i64 - 1, py as i64 - 1);

        // Column pass: nearest occupied row in the same column.
        let mut col_site: Vec<Option<u32>> = vec![None; pw * ph];
        for x in 0..pw {
            let mut last: Option<usize> = None;
            for y in 0..ph {
                if occupied(x, y) {
                    last = Some(y);
                }
                col_site[y * pw + x] = last.map(|v| v as u32);
            }
            let mut next: Option<usize> = None;
            for y in (0..ph).rev() {
                if occupied(x, y) {
                    next = Some(y);
                }
                let cur = col_site[y * pw + x];
                let pick = match (cur, next) {
                    (Some(a), Some(b)) => {
                        if y - a as usize <= b - y {
                            Some(a)
                        } else {
                            Some(b as u32)
                        }
                    }
                    (Some(a), None) => Some(a),
                    (None, Some(b)) => Some(b as u32),
                    (None, None) => None,
                };
                col_site[y * pw + x] = pick;
            }
        }

        // Row pass: lower envelope of parabolas f(x') + (x − x')².
        let mut nearest = vec![(0u32, 0u32); pw * ph];
        let mut sites: Vec<usize> = Vec::with_capacity(pw);
        let mut bounds: Vec<f64> = Vec::with_capacity(pw + 1);
        for y in 0..ph {
            let f = |x: usize| -> f64 {
                let sy = col_site[y * pw + x].expect("padded grid has an occupied ring") as f64;
                (sy - y as f64).powi(2)
            };
            sites.clear();
            bounds.clear();
            for q in 0..pw {
                let fq = f(q);
                loop {
                    match sites.last() {
                        None => {
                            sites.push(q);
                            bounds.push(f64::NEG_INFINITY);
                            break;
                        }
                        Some(&p) => {
                            let fp = f(p);
                            let s = ((fq + (q * q) as f64) - (fp + (p * p) as f64))
                                / (2.0 * (q as f64 - p as f64));
                            if s <= *bounds.last().unwrap() {
                                sites.pop();
                                bounds.pop();
                            } else {
                                sites.push(q);
                                bounds.push(s);
                                break;
                            }
                        }
                    }
                }
            }
            let mut k = 0;
            for x in 0..pw {
                while k + 1 < sites.len() && bounds[k + 1] < x as f64 {
                    k += 1;
                }
                let sx = sites[k];
                let sy = col_site[y * pw + sx].unwrap();
                nearest[y * pw + x] = (sx as u32, sy);
            }
        }

        Self {
            grid: grid.clone(),
            pw,
            ph,
            nearest,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    /// Nearest occupied cell `(ix, iy)` in grid coordinates (may lie on the
    /// out-of-bounds ring, i.e. be −1 or width/height).
    pub fn nearest_cell(&self, p: Vec2) -> (i64, i64) {
        let (ix, iy) = self.grid.cell_of(p);
        let px = (ix + 1).clamp(0, self.pw as i64 - 1) as usize;
        let py = (iy + 1).clamp(0, self.ph as i64 - 1) as usize;
        let (sx, sy) = self.nearest[py * self.pw + px];
        (sx as i64 - 1, sy as i64 - 1)
    }

    /// Closest point of the nearest occupied cell.
    pub fn nearest_obstacle_point(&self, p: Vec2) -> Vec2 {
        let (ix, iy) = self.nearest_cell(p);
        self.grid.closest_point_in_cell(p, ix, iy)
    }

    /// Distance from `p` to the nearest occupied cell box.
    pub fn clearance(&self, p: Vec2) -> f64 {
        self.nearest_obstacle_point(p).distance(p)
    }
}
