use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::PedestrianSnapshot;
use crate::error::SimError;
use crate::geometry::{
    lidar_angles, raycast, ClearanceMap, OccupancyGrid, Pose2D, Vec2, VelocityCommand, LIDAR_MAX_RANGE,
    LIDAR_RAYS,
};
use crate::sfm::{self, Pedestrian, SfmAgent};
use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeStatus {
    Running,
    Success,
    Collision,
    Timeout,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeStatus::Running => "running",
            EpisodeStatus::Success => "success",
            EpisodeStatus::Collision => "collision",
            EpisodeStatus::Timeout => "timeout",
        }
    }
}

/// Physical constants of the simulated robot.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSpec {
    pub radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub goal_tolerance: f64,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            radius: 0.25,
            v_max: 0.6,
            w_max: 1.5,
            goal_tolerance: 0.3,
        }
    }
}

/// Seeded jitter applied to a scenario so repetitions differ: pedestrian
/// starts move up to ±0.2 m per axis, desired speeds scale by 0.9–1.1 and the
/// robot heading turns by up to ±0.1 rad.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub position: f64,
    pub speed: f64,
    pub heading: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            position: 0.2,
            speed: 0.1,
            heading: 0.1,
        }
    }
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        position: 0.0,
        speed: 0.0,
        heading: 0.0,
    };
}

#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Arc<Scenario>,
    pub clearance: Arc<ClearanceMap>,
    pub spec: RobotSpec,
    pub robot: Pose2D,
    pub command: VelocityCommand,
    pub pedestrians: Vec<Pedestrian>,
    pub status: EpisodeStatus,
    pub steps: u64,
    pub dt: f64,
}

impl World {
    pub fn new(scenario: Arc<Scenario>, grid: &OccupancyGrid, spec: RobotSpec, seed: u64, jitter: Perturbation) -> Self {
        Self::with_clearance(scenario, Arc::new(ClearanceMap::new(grid)), spec, seed, jitter)
    }

    pub fn with_clearance(
        scenario: Arc<Scenario>,
        clearance: Arc<ClearanceMap>,
        spec: RobotSpec,
        seed: u64,
        jitter: Perturbation,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = clearance.grid();
        let mut robot = scenario.robot_start;
        if jitter.heading > 0.0 {
            robot = Pose2D::new(robot.x, robot.y, robot.theta + rng.random_range(-jitter.heading..=jitter.heading));
        }
        let pedestrians = scenario
            .pedestrians
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let mut start = p.start;
                let mut speed = p.desired_speed;
                if jitter.position > 0.0 {
                    let d = Vec2::new(
                        rng.random_range(-jitter.position..=jitter.position),
                        rng.random_range(-jitter.position..=jitter.position),
                    );
                    if !grid.disc_collides(start + d, p.radius) {
                        start += d;
                    }
                }
                if jitter.speed > 0.0 {
                    speed *= 1.0 + rng.random_range(-jitter.speed..=jitter.speed);
                }
                Pedestrian::new(id, start, p.waypoints.clone(), speed, p.radius, p.looping)
            })
            .collect();
        Self {
            dt: scenario.sfm.dt,
            scenario,
            clearance,
            spec,
            robot,
            command: VelocityCommand::STOP,
            pedestrians,
            status: EpisodeStatus::Running,
            steps: 0,
        }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        self.clearance.grid()
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn goal(&self) -> Vec2 {
        self.scenario.goal
    }

    /// The robot as an SFM agent (used by pedestrians and social work).
    pub fn robot_agent(&self) -> SfmAgent {
        SfmAgent {
            position: self.robot.position(),
            velocity: self.robot.heading() * self.command.v,
            desired_speed: self.spec.v_max,
            goal: self.scenario.goal,
            radius: self.spec.radius,
        }
    }

    pub fn pedestrian_agents(&self) -> Vec<SfmAgent> {
        self.pedestrians.iter().map(|p| p.agent).collect()
    }

    pub fn pedestrian_snapshots(&self) -> Vec<PedestrianSnapshot> {
        self.pedestrians
            .iter()
            .map(|p| PedestrianSnapshot {
                position: p.agent.position,
                velocity: p.agent.velocity,
                radius: p.agent.radius,
            })
            .collect()
    }

    /// Nearest static obstacle point, if within LiDAR range.
    pub fn nearest_obstacle(&self, p: Vec2) -> Option<Vec2> {
        let q = self.clearance.nearest_obstacle_point(p);
        (q.distance(p) <= LIDAR_MAX_RANGE).then_some(q)
    }

    /// Social work increments at the current state.
    pub fn social_work_now(&self) -> (f64, Vec<f64>) {
        let robot = self.robot_agent();
        let peds = self.pedestrian_agents();
        let p = &self.scenario.sfm;
        let bd = sfm::robot_breakdown(&robot, &peds, self.nearest_obstacle(robot.position), p);
        let seen = sfm::robot_as_seen_by_pedestrians(&robot, &peds, p);
        sfm::social_work_step(&bd, &seen)
    }

    /// Closest center-to-center pedestrian distance.
    pub fn min_pedestrian_distance(&self) -> Option<f64> {
        let r = self.robot.position();
        self.pedestrians
            .iter()
            .map(|p| p.agent.position.distance(r))
            .min_by(f64::total_cmp)
    }

    fn robot_collides(&self) -> bool {
        let r = self.robot.position();
        if self.grid().disc_collides(r, self.spec.radius) {
            return true;
        }
        self.pedestrians
            .iter()
            .any(|p| p.agent.position.distance(r) < self.spec.radius + p.agent.radius)
    }

    /// Advances one physics step: unicycle robot under the clamped command,
    /// SFM pedestrians, then status update (collision wins over success).
    pub fn step(&mut self, cmd: VelocityCommand) -> Result<EpisodeStatus, SimError> {
        if self.status.is_terminal() {
            return Err(SimError::Terminal(self.status));
        }
        let dt = self.dt;
        let cmd = cmd.clamped(self.spec.v_max, self.spec.w_max);
        let robot_view = self.robot_agent_with(cmd);
        let sfm_params = self.scenario.sfm;
        sfm::step_pedestrians(&mut self.pedestrians, &self.clearance, Some(&robot_view), &sfm_params, dt);
        self.robot = crate::controller::arc_pose(&self.robot, cmd, dt);
        self.command = cmd;
        self.steps += 1;

        self.status = if self.robot_collides() {
            EpisodeStatus::Collision
        } else if self.robot.position().distance(self.scenario.goal) < self.spec.goal_tolerance {
            EpisodeStatus::Success
        } else if self.time() >= self.scenario.max_duration - 1e-9 {
            EpisodeStatus::Timeout
        } else {
            EpisodeStatus::Running
        };
        Ok(self.status)
    }

    fn robot_agent_with(&self, cmd: VelocityCommand) -> SfmAgent {
        SfmAgent {
            velocity: self.robot.heading() * cmd.v,
            ..self.robot_agent()
        }
    }

    /// 36-beam LiDAR in the robot frame; pedestrians are visible.
    pub fn scan(&self) -> [f64; LIDAR_RAYS] {
        let mut out = [LIDAR_MAX_RANGE; LIDAR_RAYS];
        let origin = self.robot.position();
        for (r, a) in out.iter_mut().zip(lidar_angles()) {
            let mut d = raycast(self.grid(), &self.robot, a, LIDAR_MAX_RANGE);
            let dir = Vec2::from_polar(1.0, self.robot.theta + a);
            for p in &self.pedestrians {
                if let Some(t) = ray_circle(origin, dir, p.agent.position, p.agent.radius) {
                    d = d.min(t);
                }
            }
            *r = d.clamp(0.0, LIDAR_MAX_RANGE);
        }
        out
    }
}

/// First non-negative intersection of a unit-direction ray with a circle;
/// 0 when the origin is inside.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = dir.dot(oc);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(text: &str) -> World {
        let (sc, grid) = Scenario::load(text, 0.25).unwrap();
        World::new(Arc::new(sc), &grid, RobotSpec::default(), 0, Perturbation::NONE)
    }

    const OPEN: &str = "[world]\nsize 20 20\n[robot]\nstart 2 10 0\ngoal 18 10\n";

    #[test]
    fn straight_drive_is_exact() {
        let mut w = world(OPEN);
        for _ in 0..20 {
            w.step(VelocityCommand::new(0.6, 0.0)).unwrap();
        }
        assert!((w.robot.x - 2.6).abs() < 1e-9);
        assert!((w.time() - 1.0).abs() < 1e-12);
        assert_eq!(w.status, EpisodeStatus::Running);
    }

    #[test]
    fn commands_are_clamped() {
        let mut w = world(OPEN);
        w.step(VelocityCommand::new(3.0, -9.0)).unwrap();
        assert_eq!(w.command, VelocityCommand::new(0.6, -1.5));
    }

    #[test]
    fn wall_contact_time_matches_gap() {
        let text = "[world]\nsize 10 4\nrect 5 0 1 4\n[robot]\nstart 2 2 0\ngoal 1 1\n";
        let mut w = world(text);
        let gap = 5.0 - 2.0 - 0.25;
        let expected = gap / 0.6;
        while w.status == EpisodeStatus::Running {
            w.step(VelocityCommand::new(0.6, 0.0)).unwrap();
        }
        assert_eq!(w.status, EpisodeStatus::Collision);
        assert!(w.time() >= expected - 1e-9 && w.time() <= expected + w.dt + 1e-9, "{}", w.time());
        assert!(matches!(w.step(VelocityCommand::STOP), Err(SimError::Terminal(_))));
    }

    #[test]
    fn collision_beats_success() {
        // Goal and pedestrian contact become true on the same step.
        let text = "[world]\nsize 10 4\n[robot]\nstart 2 2 0\ngoal 2.45 2\n[pedestrian]\nstart 2.75 2\n";
        let mut w = world(text);
        while !w.status.is_terminal() {
            w.step(VelocityCommand::new(0.6, 0.0)).unwrap();
        }
        assert!(w.robot.position().distance(w.goal()) < 0.3);
        assert_eq!(w.status, EpisodeStatus::Collision);
    }

    #[test]
    fn reaches_goal_and_times_out() {
        let mut w = world("[world]\nsize 10 4\n[robot]\nstart 2 2 0\ngoal 3 2\n");
        while !w.status.is_terminal() {
            w.step(VelocityCommand::new(0.6, 0.0)).unwrap();
        }
        assert_eq!(w.status, EpisodeStatus::Success);
        let mut w = world("[world]\nsize 10 4\n[robot]\nstart 2 2 0\ngoal 8 2\n[episode]\nmax_duration 1\n");
        while !w.status.is_terminal() {
            w.step(VelocityCommand::STOP).unwrap();
        }
        assert_eq!(w.status, EpisodeStatus::Timeout);
        assert_eq!(w.steps, 20);
    }

    #[test]
    fn scan_sees_walls_and_people() {
        let w = world("[world]\nsize 20 20\n[robot]\nstart 10 10 0\ngoal 18 10\n");
        assert!(w.scan().iter().all(|&r| r == 3.0));
        let w = world("[world]\nsize 20 20\n[robot]\nstart 5 10 0\ngoal 18 10\n[pedestrian]\nstart 6 10\n");
        let s = w.scan();
        assert!((s[0] - (1.0 - 0.35)).abs() < 1e-12, "{}", s[0]);
        assert!(s.iter().all(|&r| r <= 3.0));
    }

    #[test]
    fn ray_circle_cases() {
        let o = Vec2::ZERO;
        let d = Vec2::new(1.0, 0.0);
        assert_eq!(ray_circle(o, d, Vec2::new(2.0, 0.0), 0.5), Some(1.5));
        assert_eq!(ray_circle(o, d, Vec2::new(-2.0, 0.0), 0.5), None);
        assert_eq!(ray_circle(o, d, Vec2::new(2.0, 1.0), 0.5), None);
        assert_eq!(ray_circle(o, d, Vec2::new(0.1, 0.0), 0.5), Some(0.0));
    }

    #[test]
    fn seeded_jitter_is_reproducible() {
        let text = "[world]\nsize 20 20\n[robot]\nstart 5 10 0\ngoal 18 10\n[pedestrian]\nstart 9 10\nwaypoints 1 10\n";
        let (sc, grid) = Scenario::load(text, 0.25).unwrap();
        let sc = Arc::new(sc);
        let a = World::new(sc.clone(), &grid, RobotSpec::default(), 7, Perturbation::default());
        let b = World::new(sc.clone(), &grid, RobotSpec::default(), 7, Perturbation::default());
        let c = World::new(sc, &grid, RobotSpec::default(), 8, Perturbation::default());
        assert_eq!(a.pedestrians, b.pedestrians);
        assert_eq!(a.robot, b.robot);
        assert_ne!(a.pedestrians, c.pedestrians);
    }
}
