//! Scenario documents.
//!
//! A scenario is a line-oriented text file. `#` starts a comment; blank lines
//! are ignored. Keys live in sections, and every line is `key value...`:
//!
//! ```text
//! [world]
//! name        corridor_demo          # identifier, no spaces
//! size        12.0 4.0               # width height (m), origin at (0, 0)
//! resolution  0.05                   # optional, m/cell
//! rect        0.0 0.0 12.0 0.2       # x y w h, repeatable
//! polyline    0.1 3 1 5 1 5 3        # thickness x1 y1 x2 y2 ..., repeatable
//!
//! [robot]
//! start       1.0 2.0 0.0            # x y theta
//! goal        11.0 2.0               # x y
//!
//! [pedestrian]                       # repeatable section
//! start       10.0 2.2
//! waypoints   1.0 2.2 10.0 2.2       # optional; none means standing still
//! speed       0.9                    # optional desired speed (m/s)
//! radius      0.35                   # optional
//! loop        false                  # optional
//!
//! [sfm]                              # optional overrides
//! A 4.5
//! lambda 2.0
//!
//! [episode]
//! max_duration 60
//! ```
//!
//! Parsing is strict: unknown sections or keys, repeated single-valued keys
//! and wrong argument counts are errors.

use std::fmt::Write as _;

use crate::error::ScenarioError;
use crate::geometry::{OccupancyGrid, Pose2D, Vec2, DEFAULT_RESOLUTION};
use crate::sfm::SfmParams;

pub const DEFAULT_PEDESTRIAN_SPEED: f64 = 0.9;
pub const DEFAULT_PEDESTRIAN_RADIUS: f64 = 0.35;
pub const DEFAULT_MAX_DURATION: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Obstacle {
    Rect { corner: Vec2, size: Vec2 },
    Polyline { points: Vec<Vec2>, thickness: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianSpec {
    pub start: Vec2,
    pub waypoints: Vec<Vec2>,
    pub desired_speed: f64,
    pub radius: f64,
    pub looping: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub size: Vec2,
    pub resolution: f64,
    pub obstacles: Vec<Obstacle>,
    pub robot_start: Pose2D,
    pub goal: Vec2,
    pub pedestrians: Vec<PedestrianSpec>,
    pub max_duration: f64,
    pub sfm: SfmParams,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Parser::default().run(text)
    }

    /// Rasterizes the obstacle primitives.
    pub fn rasterize(&self) -> Result<OccupancyGrid, ScenarioError> {
        let mut grid = OccupancyGrid::with_extent(Vec2::ZERO, self.size, self.resolution)?;
        for ob in &self.obstacles {
            match ob {
                Obstacle::Rect { corner, size } => grid.fill_rect(*corner, *size),
                Obstacle::Polyline { points, thickness } => {
                    for pair in points.windows(2) {
                        grid.fill_segment(pair[0], pair[1], *thickness);
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Checks that robot start, goal and pedestrian starts are in free space.
    pub fn validate(&self, grid: &OccupancyGrid, robot_radius: f64) -> Result<(), ScenarioError> {
        let s = self.robot_start.position();
        if grid.disc_collides(s, robot_radius) {
            return Err(ScenarioError::Invalid(format!(
                "{}: robot start ({:.2}, {:.2}) collides with an obstacle",
                self.name, s.x, s.y
            )));
        }
        if grid.disc_collides(self.goal, robot_radius) {
            return Err(ScenarioError::Invalid(format!(
                "{}: goal ({:.2}, {:.2}) lies in or too close to an obstacle",
                self.name, self.goal.x, self.goal.y
            )));
        }
        for (i, p) in self.pedestrians.iter().enumerate() {
            if grid.disc_collides(p.start, p.radius) {
                return Err(ScenarioError::Invalid(format!(
                    "{}: pedestrian {i} starts inside an obstacle",
                    self.name
                )));
            }
            if p.radius <= 0.0 || p.desired_speed < 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "{}: pedestrian {i} needs radius > 0 and speed ≥ 0",
                    self.name
                )));
            }
        }
        if self.max_duration <= 0.0 {
            return Err(ScenarioError::Invalid("max_duration must be positive".into()));
        }
        Ok(())
    }

    /// Parses, rasterizes and validates.
    pub fn load(text: &str, robot_radius: f64) -> Result<(Self, OccupancyGrid), ScenarioError> {
        let sc = Self::parse(text)?;
        let grid = sc.rasterize()?;
        sc.validate(&grid, robot_radius)?;
        Ok((sc, grid))
    }

    /// Renders the scenario back into the document format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[world]");
        let _ = writeln!(s, "name {}", self.name);
        let _ = writeln!(s, "size {} {}", self.size.x, self.size.y);
        let _ = writeln!(s, "resolution {}", self.resolution);
        for ob in &self.obstacles {
            match ob {
                Obstacle::Rect { corner, size } => {
                    let _ = writeln!(s, "rect {} {} {} {}", corner.x, corner.y, size.x, size.y);
                }
                Obstacle::Polyline { points, thickness } => {
                    let _ = write!(s, "polyline {thickness}");
                    for p in points {
                        let _ = write!(s, " {} {}", p.x, p.y);
                    }
                    s.push('\n');
                }
            }
        }
        let r = self.robot_start;
        let _ = writeln!(s, "\n[robot]\nstart {} {} {}\ngoal {} {}", r.x, r.y, r.theta, self.goal.x, self.goal.y);
        for p in &self.pedestrians {
            let _ = writeln!(s, "\n[pedestrian]\nstart {} {}", p.start.x, p.start.y);
            if !p.waypoints.is_empty() {
                let _ = write!(s, "waypoints");
                for w in &p.waypoints {
                    let _ = write!(s, " {} {}", w.x, w.y);
                }
                s.push('\n');
            }
            let _ = writeln!(s, "speed {}\nradius {}\nloop {}", p.desired_speed, p.radius, p.looping);
        }
        let f = &self.sfm;
        let _ = writeln!(
            s,
            "\n[sfm]\nA {}\nlambda {}\ngamma {}\nn {}\nn_prime {}\nA_obs {}\nB_obs {}\ntau {}\ndt {}",
            f.a, f.lambda, f.gamma, f.n, f.n_prime, f.a_obs, f.b_obs, f.tau, f.dt
        );
        let _ = writeln!(s, "\n[episode]\nmax_duration {}", self.max_duration);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    World,
    Robot,
    Pedestrian,
    Sfm,
    Episode,
}

#[derive(Default)]
struct PedDraft {
    start: Option<Vec2>,
    waypoints: Option<Vec<Vec2>>,
    speed: Option<f64>,
    radius: Option<f64>,
    looping: Option<bool>,
    line: usize,
}

#[derive(Default)]
struct Parser {
    name: Option<String>,
    size: Option<Vec2>,
    resolution: Option<f64>,
    obstacles: Vec<Obstacle>,
    start: Option<Pose2D>,
    goal: Option<Vec2>,
    peds: Vec<PedDraft>,
    sfm: SfmParams,
    sfm_seen: Vec<String>,
    max_duration: Option<f64>,
}

fn err(line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        msg: msg.into(),
    }
}

fn numbers(line: usize, key: &str, args: &[&str]) -> Result<Vec<f64>, ScenarioError> {
    args.iter()
        .map(|a| {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("`{key}`: `{a}` is not a finite number")))
        })
        .collect()
}

fn exactly(line: usize, key: &str, args: &[&str], n: usize) -> Result<Vec<f64>, ScenarioError> {
    if args.len() != n {
        return Err(err(line, format!("`{key}` takes {n} value(s), got {}", args.len())));
    }
    numbers(line, key, args)
}

fn points(line: usize, key: &str, args: &[&str]) -> Result<Vec<Vec2>, ScenarioError> {
    if args.is_empty() || args.len() % 2 != 0 {
        return Err(err(line, format!("`{key}` takes x y pairs")));
    }
    let v = numbers(line, key, args)?;
    Ok(v.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect())
}

fn once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), ScenarioError> {
    if slot.is_some() {
        return Err(err(line, format!("duplicate key `{key}`")));
    }
    *slot = Some(value);
    Ok(())
}

impl Parser {
    fn run(mut self, text: &str) -> Result<Scenario, ScenarioError> {
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim();
                section = match name {
                    "world" => Section::World,
                    "robot" => Section::Robot,
                    "pedestrian" => {
                        self.peds.push(PedDraft {
                            line,
                            ..Default::default()
                        });
                        Section::Pedestrian
                    }
                    "sfm" => Section::Sfm,
                    "episode" => Section::Episode,
                    other => return Err(err(line, format!("unknown section `[{other}]`"))),
                };
                continue;
            }
            let mut parts = content.split_whitespace();
            let key = parts.next().unwrap();
            let args: Vec<&str> = parts.collect();
            match section {
                Section::None => return Err(err(line, format!("`{key}` outside of any section"))),
                Section::World => self.world_key(line, key, &args)?,
                Section::Robot => self.robot_key(line, key, &args)?,
                Section::Pedestrian => self.ped_key(line, key, &args)?,
                Section::Sfm => self.sfm_key(line, key, &args)?,
                Section::Episode => match key {
                    "max_duration" => {
                        let v = exactly(line, key, &args, 1)?;
                        once(&mut self.max_duration, v[0], line, key)?;
                    }
                    _ => return Err(err(line, format!("unknown key `{key}` in [episode]"))),
                },
            }
        }
        self.finish()
    }

    fn world_key(&mut self, line: usize, key: &str, args: &[&str]) -> Result<(), ScenarioError> {
        match key {
            "name" => {
                if args.len() != 1 {
                    return Err(err(line, "`name` takes one identifier"));
                }
                once(&mut self.name, args[0].to_string(), line, key)
            }
            "size" => {
                let v = exactly(line, key, args, 2)?;
                if v[0] <= 0.0 || v[1] <= 0.0 {
                    return Err(err(line, "`size` must be positive"));
                }
                once(&mut self.size, Vec2::new(v[0], v[1]), line, key)
            }
            "resolution" => {
                let v = exactly(line, key, args, 1)?;
                if v[0] <= 0.0 {
                    return Err(err(line, "`resolution` must be positive"));
                }
                once(&mut self.resolution, v[0], line, key)
            }
            "rect" => {
                let v = exactly(line, key, args, 4)?;
                self.obstacles.push(Obstacle::Rect {
                    corner: Vec2::new(v[0], v[1]),
                    size: Vec2::new(v[2], v[3]),
                });
                Ok(())
            }
            "polyline" => {
                if args.len() < 5 {
                    return Err(err(line, "`polyline` takes a thickness and at least two points"));
                }
                let thickness = numbers(line, key, &args[..1])?[0];
                let pts = points(line, key, &args[1..])?;
                if pts.len() < 2 || thickness <= 0.0 {
                    return Err(err(line, "`polyline` needs two points and positive thickness"));
                }
                self.obstacles.push(Obstacle::Polyline { points: pts, thickness });
                Ok(())
            }
            _ => Err(err(line, format!("unknown key `{key}` in [world]"))),
        }
    }

    fn robot_key(&mut self, line: usize, key: &str, args: &[&str]) -> Result<(), ScenarioError> {
        match key {
            "start" => {
                let v = exactly(line, key, args, 3)?;
                once(&mut self.start, Pose2D::new(v[0], v[1], v[2]), line, key)
            }
            "goal" => {
                let v = exactly(line, key, args, 2)?;
                once(&mut self.goal, Vec2::new(v[0], v[1]), line, key)
            }
            _ => Err(err(line, format!("unknown key `{key}` in [robot]"))),
        }
    }

    fn ped_key(&mut self, line: usize, key: &str, args: &[&str]) -> Result<(), ScenarioError> {
        let ped = self.peds.last_mut().expect("inside a pedestrian section");
        match key {
            "start" => {
                let v = exactly(line, key, args, 2)?;
                once(&mut ped.start, Vec2::new(v[0], v[1]), line, key)
            }
            "waypoints" => {
                let pts = points(line, key, args)?;
                once(&mut ped.waypoints, pts, line, key)
            }
            "speed" => {
                let v = exactly(line, key, args, 1)?;
                once(&mut ped.speed, v[0], line, key)
            }
            "radius" => {
                let v = exactly(line, key, args, 1)?;
                once(&mut ped.radius, v[0], line, key)
            }
            "loop" => {
                let b = match args {
                    ["true"] => true,
                    ["false"] => false,
                    _ => return Err(err(line, "`loop` takes true or false")),
                };
                once(&mut ped.looping, b, line, key)
            }
            _ => Err(err(line, format!("unknown key `{key}` in [pedestrian]"))),
        }
    }

    fn sfm_key(&mut self, line: usize, key: &str, args: &[&str]) -> Result<(), ScenarioError> {
        let v = exactly(line, key, args, 1)?[0];
        let slot = match key {
            "A" => &mut self.sfm.a,
            "lambda" => &mut self.sfm.lambda,
            "gamma" => &mut self.sfm.gamma,
            "n" => &mut self.sfm.n,
            "n_prime" => &mut self.sfm.n_prime,
            "A_obs" => &mut self.sfm.a_obs,
            "B_obs" => &mut self.sfm.b_obs,
            "tau" => &mut self.sfm.tau,
            "dt" => &mut self.sfm.dt,
            _ => return Err(err(line, format!("unknown key `{key}` in [sfm]"))),
        };
        if self.sfm_seen.iter().any(|k| k == key) {
            return Err(err(line, format!("duplicate key `{key}`")));
        }
        *slot = v;
        self.sfm_seen.push(key.to_string());
        Ok(())
    }

    fn finish(self) -> Result<Scenario, ScenarioError> {
        let missing = |what: &str| ScenarioError::Invalid(format!("missing required `{what}`"));
        let pedestrians = self
            .peds
            .into_iter()
            .map(|d| {
                Ok(PedestrianSpec {
                    start: d.start.ok_or_else(|| err(d.line, "[pedestrian] needs a `start`"))?,
                    waypoints: d.waypoints.unwrap_or_default(),
                    desired_speed: d.speed.unwrap_or(DEFAULT_PEDESTRIAN_SPEED),
                    radius: d.radius.unwrap_or(DEFAULT_PEDESTRIAN_RADIUS),
                    looping: d.looping.unwrap_or(false),
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        if self.sfm.tau <= 0.0 || self.sfm.dt <= 0.0 || self.sfm.b_obs <= 0.0 || self.sfm.gamma <= 0.0 {
            return Err(ScenarioError::Invalid("sfm tau, dt, B_obs and gamma must be positive".into()));
        }
        Ok(Scenario {
            name: self.name.unwrap_or_else(|| "unnamed".into()),
            size: self.size.ok_or_else(|| missing("[world] size"))?,
            resolution: self.resolution.unwrap_or(DEFAULT_RESOLUTION),
            obstacles: self.obstacles,
            robot_start: self.start.ok_or_else(|| missing("[robot] start"))?,
            goal: self.goal.ok_or_else(|| missing("[robot] goal"))?,
            pedestrians,
            max_duration: self.max_duration.unwrap_or(DEFAULT_MAX_DURATION),
            sfm: self.sfm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::raycast;
    use std::f64::consts::FRAC_PI_2;

    const CORRIDOR: &str = "
        [world]
        name corridor
        size 8 3
        rect 0 0 8 1.0      # lower wall, face at y = 1.0
        rect 0 2.0 8 1.0    # upper wall, face at y = 2.0
        [robot]
        start 1 1.5 0
        goal 7 1.5
        [pedestrian]
        start 6 1.5
        waypoints 1 1.5
        speed 0.8
        [episode]
        max_duration 30
    ";

    #[test]
    fn parses_and_rasterizes_corridor() {
        let (sc, grid) = Scenario::load(CORRIDOR, 0.25).unwrap();
        assert_eq!(sc.name, "corridor");
        assert_eq!(sc.pedestrians.len(), 1);
        assert_eq!(sc.pedestrians[0].radius, DEFAULT_PEDESTRIAN_RADIUS);
        assert_eq!(sc.max_duration, 30.0);
        // Beam straight across the 1 m corridor.
        let d = raycast(&grid, &Pose2D::new(4.0, 1.02, FRAC_PI_2), 0.0, 3.0);
        assert!((d - 0.98).abs() <= grid.resolution(), "{d}");
        let up = raycast(&grid, &Pose2D::new(4.0, 1.5, FRAC_PI_2), 0.0, 3.0);
        let down = raycast(&grid, &Pose2D::new(4.0, 1.5, -FRAC_PI_2), 0.0, 3.0);
        assert!((up + down - 1.0).abs() <= grid.resolution(), "{up} + {down}");
    }

    #[test]
    fn empty_world_is_free() {
        let (_, grid) = Scenario::load("[world]\nsize 4 4\n[robot]\nstart 1 1 0\ngoal 3 3\n", 0.25).unwrap();
        assert_eq!(grid.occupied_count(), 0);
    }

    #[test]
    fn rejects_goal_in_wall() {
        let text = CORRIDOR.replace("goal 7 1.5", "goal 7 0.5");
        assert!(matches!(Scenario::load(&text, 0.25), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn strictness() {
        let bad = [
            "[world]\nsize 4 4\ncolour red\n",
            "[wrld]\n",
            "size 4 4\n",
            "[world]\nsize 4\n",
            "[world]\nsize 4 4\nsize 5 5\n",
            "[world]\nsize 4 x\n",
            "[world]\nsize 4 4\n[robot]\nstart 1 1 0\ngoal 3 3\n[sfm]\nkappa 3\n",
            "[world]\nsize 4 4\n[robot]\nstart 1 1 0\ngoal 3 3\n[pedestrian]\nwaypoints 1 1\n",
            "[world]\nsize 4 4\n[robot]\nstart 1 1 0\n",
        ];
        for text in bad {
            assert!(Scenario::parse(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn text_round_trip() {
        let sc = Scenario::parse(CORRIDOR).unwrap();
        let again = Scenario::parse(&sc.to_text()).unwrap();
        assert_eq!(sc, again);
    }
}
