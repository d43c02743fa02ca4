//! Closed-loop episode driver: global plan once, local controller at its own
//! cadence, physics in between, with metric bookkeeping and a full trace.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, CostWeights, SfwController, SocialTerm, WorldSnapshot};
use crate::error::{Error, SimError};
use crate::geometry::{ClearanceMap, Vec2, VelocityCommand};
use crate::nav_global::{local_waypoint, plan_global, GlobalPath, DEFAULT_INFLATION};
use crate::sfm::SocialWorkAccumulator;
use crate::sim::{library_source, EpisodeStatus, Perturbation, RobotSpec, Scenario, World};

/// Surface-distance upper bounds of the intimate, personal and social zones.
pub const PROXEMIC_BOUNDS: [f64; 3] = [0.45, 1.2, 3.6];

/// Index into `[intimate, personal, social, public]`.
pub fn proxemic_zone(surface_distance: Option<f64>) -> usize {
    match surface_distance {
        None => 3,
        Some(d) => PROXEMIC_BOUNDS.iter().position(|&b| d < b).unwrap_or(3),
    }
}

/// Smallest center distance minus both radii, over all pedestrians.
pub fn min_surface_distance(world: &World) -> Option<f64> {
    let r = world.robot.position();
    world
        .pedestrians
        .iter()
        .map(|p| p.agent.position.distance(r) - world.spec.radius - p.agent.radius)
        .min_by(f64::total_cmp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub controller: ControllerParams,
    pub robot: RobotSpec,
    pub jitter: Perturbation,
    pub inflation: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            controller: ControllerParams::default(),
            robot: RobotSpec::default(),
            jitter: Perturbation::default(),
            inflation: DEFAULT_INFLATION,
        }
    }
}

/// One physics step of the trace. `v`/`w` is the command being executed from
/// `t` on; `control` marks rows where the controller produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub control: bool,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub pedestrians: Vec<Vec2>,
}

impl TraceRow {
    fn of(world: &World) -> Self {
        Self {
            t: world.time(),
            control: false,
            x: world.robot.x,
            y: world.robot.y,
            theta: world.robot.theta,
            v: world.command.v,
            w: world.command.w,
            pedestrians: world.pedestrians.iter().map(|p| p.agent.position).collect(),
        }
    }
}

pub struct ClosedLoop {
    pub world: World,
    pub path: GlobalPath,
    pub controller: SfwController,
    pub weights: CostWeights,
    pub steps_per_control: u64,
    pub social_work: SocialWorkAccumulator,
    /// Control steps spent in each proxemic zone.
    pub proxemics: [u64; 4],
    pub path_length: f64,
    pub commands: Vec<VelocityCommand>,
    pub trace: Vec<TraceRow>,
}

impl ClosedLoop {
    pub fn new(
        scenario: Arc<Scenario>,
        clearance: Arc<ClearanceMap>,
        cfg: &LoopConfig,
        social: SocialTerm,
        weights: CostWeights,
        seed: u64,
    ) -> Result<Self, SimError> {
        let world = World::with_clearance(scenario, clearance, cfg.robot, seed, cfg.jitter);
        let path = plan_global(&world.clearance, world.robot.position(), world.goal(), cfg.inflation)?;
        let steps_per_control = ((cfg.controller.control_dt / world.dt).round() as u64).max(1);
        let n_peds = world.pedestrians.len();
        let trace = vec![TraceRow::of(&world)];
        Ok(Self {
            world,
            path,
            controller: SfwController::new(cfg.controller).with_social_term(social),
            weights,
            steps_per_control,
            social_work: SocialWorkAccumulator::new(n_peds),
            proxemics: [0; 4],
            path_length: 0.0,
            commands: Vec::new(),
            trace,
        })
    }

    pub fn status(&self) -> EpisodeStatus {
        self.world.status
    }

    pub fn control_steps(&self) -> u64 {
        self.proxemics.iter().sum()
    }

    pub fn waypoint(&self) -> Vec2 {
        local_waypoint(&self.path, &self.world.robot, self.controller.params.waypoint_lookahead)
    }

    /// Records metrics at the current state, runs the controller once and
    /// holds its command for one control period.
    pub fn control_step(&mut self) -> Result<EpisodeStatus, SimError> {
        if self.world.status.is_terminal() {
            return Err(SimError::Terminal(self.world.status));
        }
        let (w_r, w_p) = self.world.social_work_now();
        self.social_work.add(w_r, &w_p);
        self.proxemics[proxemic_zone(min_surface_distance(&self.world))] += 1;

        let snap = WorldSnapshot {
            clearance: &self.world.clearance,
            pedestrians: self.world.pedestrian_snapshots(),
            waypoint: self.waypoint(),
            sfm: self.world.scenario.sfm,
        };
        let sel = self.controller.plan(self.world.command, &self.world.robot, &snap, &self.weights);
        let cmd = sel.command.clamped(self.world.spec.v_max, self.world.spec.w_max);
        self.commands.push(cmd);
        if let Some(row) = self.trace.last_mut() {
            row.control = true;
            row.v = cmd.v;
            row.w = cmd.w;
        }
        for _ in 0..self.steps_per_control {
            let before = self.world.robot.position();
            self.world.step(cmd)?;
            self.path_length += self.world.robot.position().distance(before);
            self.trace.push(TraceRow::of(&self.world));
            if self.world.status.is_terminal() {
                break;
            }
        }
        Ok(self.world.status)
    }

    pub fn run_to_end(&mut self) -> Result<EpisodeStatus, SimError> {
        while !self.world.status.is_terminal() {
            self.control_step()?;
        }
        Ok(self.world.status)
    }
}

/// Scenario by library name, or from a file when `name` is a path to one.
/// Returns the parsed scenario with its clearance map.
pub fn prepare_scenario(name: &str, robot_radius: f64) -> Result<(Arc<Scenario>, Arc<ClearanceMap>), Error> {
    let owned;
    let text = match library_source(name) {
        Ok(t) => t,
        Err(e) => {
            let path = std::path::Path::new(name);
            if !path.is_file() {
                return Err(e.into());
            }
            owned = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            &owned
        }
    };
    let (sc, grid) = Scenario::load(text, robot_radius)?;
    Ok((Arc::new(sc), Arc::new(ClearanceMap::new(&grid))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_loop(text: &str) -> ClosedLoop {
        let (sc, grid) = Scenario::load(text, 0.25).unwrap();
        let cfg = LoopConfig {
            jitter: Perturbation::NONE,
            ..Default::default()
        };
        ClosedLoop::new(
            Arc::new(sc),
            Arc::new(ClearanceMap::new(&grid)),
            &cfg,
            SocialTerm::Enabled,
            CostWeights::SFW,
            0,
        )
        .unwrap()
    }

    #[test]
    fn zones() {
        assert_eq!(proxemic_zone(None), 3);
        assert_eq!(proxemic_zone(Some(-0.1)), 0);
        assert_eq!(proxemic_zone(Some(0.45)), 1);
        assert_eq!(proxemic_zone(Some(1.19)), 1);
        assert_eq!(proxemic_zone(Some(1.2)), 2);
        assert_eq!(proxemic_zone(Some(3.6)), 3);
    }

    #[test]
    fn reaches_goal_in_open_space() {
        let mut l = open_loop("[world]\nsize 10 6\n[robot]\nstart 1 3 0\ngoal 9 3\n");
        assert_eq!(l.run_to_end().unwrap(), EpisodeStatus::Success);
        assert_eq!(l.trace.len() as u64, l.world.steps + 1);
        assert_eq!(l.commands.len() as u64, l.control_steps());
        let recomputed: f64 = l
            .trace
            .windows(2)
            .map(|w| Vec2::new(w[1].x, w[1].y).distance(Vec2::new(w[0].x, w[0].y)))
            .sum();
        assert!((recomputed - l.path_length).abs() < 1e-9);
        assert!(l.path_length > 7.5 && l.path_length < 8.5, "{}", l.path_length);
        assert!(matches!(l.control_step(), Err(SimError::Terminal(_))));
    }
}
