//! The planner as an environment: one agent step holds a weight set for
//! several controller cycles.

use std::sync::Arc;

use super::observation::{build_observation_at, Observation};
use super::reward::{reward, RewardBreakdown, RewardCoefficients, RewardInputs};
use crate::controller::{CostWeights, SocialTerm};
use crate::episode::{ClosedLoop, LoopConfig};
use crate::error::SimError;
use crate::geometry::{ClearanceMap, LIDAR_MAX_RANGE};
use crate::sim::{EpisodeStatus, Scenario};

/// Agent decision period in seconds.
pub const AGENT_DT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: RewardBreakdown,
    pub status: EpisodeStatus,
    pub done: bool,
}

pub struct AgentEnv {
    pub inner: ClosedLoop,
    pub prev_weights: CostWeights,
    pub controls_per_step: u64,
    pub coefficients: RewardCoefficients,
    pub steps: u64,
}

impl AgentEnv {
    pub fn new(
        scenario: Arc<Scenario>,
        clearance: Arc<ClearanceMap>,
        cfg: &LoopConfig,
        coefficients: RewardCoefficients,
        seed: u64,
    ) -> Result<Self, SimError> {
        let inner = ClosedLoop::new(scenario, clearance, cfg, SocialTerm::Enabled, CostWeights::SFW, seed)?;
        let controls_per_step = ((AGENT_DT / cfg.controller.control_dt).round() as u64).max(1);
        Ok(Self {
            inner,
            prev_weights: CostWeights::SFW,
            controls_per_step,
            coefficients,
            steps: 0,
        })
    }

    pub fn status(&self) -> EpisodeStatus {
        self.inner.status()
    }

    pub fn observe(&self) -> Observation {
        let w = &self.inner.world;
        build_observation_at(w, &self.prev_weights, self.inner.waypoint(), &w.scan())
    }

    /// Applies `weights` for one agent period and scores the transition
    /// against the local waypoint fixed at its start.
    pub fn step(&mut self, weights: CostWeights) -> Result<StepOutcome, SimError> {
        let waypoint = self.inner.waypoint();
        let d_prev = self.inner.world.robot.position().distance(waypoint);
        let sw_before = self.inner.social_work.total();
        self.inner.weights = weights;
        for _ in 0..self.controls_per_step {
            if self.inner.control_step()?.is_terminal() {
                break;
            }
        }
        self.prev_weights = weights;
        self.steps += 1;

        let w = &self.inner.world;
        let d_obstacle = w.scan().into_iter().fold(LIDAR_MAX_RANGE, f64::min);
        let inputs = RewardInputs {
            d_prev,
            d_now: w.robot.position().distance(waypoint),
            phi: w.robot.bearing_to(waypoint),
            v: w.command.v,
            v_max: w.spec.v_max,
            d_obstacle,
            d_person: w.min_pedestrian_distance(),
            social_work: self.inner.social_work.total() - sw_before,
            collided: w.status == EpisodeStatus::Collision,
        };
        Ok(StepOutcome {
            reward: reward(&inputs, &self.coefficients),
            status: w.status,
            done: w.status.is_terminal(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Perturbation;

    #[test]
    fn open_space_step_rewards_progress() {
        let (sc, grid) =
            Scenario::load("[world]\nsize 20 20\n[robot]\nstart 5 10 0\ngoal 15 10\n", 0.25).unwrap();
        let cfg = LoopConfig {
            jitter: Perturbation::NONE,
            ..Default::default()
        };
        let mut env = AgentEnv::new(
            Arc::new(sc),
            Arc::new(ClearanceMap::new(&grid)),
            &cfg,
            RewardCoefficients::default(),
            0,
        )
        .unwrap();
        assert_eq!(env.controls_per_step, 5);
        let o = env.observe();
        assert!((o.goal_distance() - 2.0).abs() < 1e-9);
        let out = env.step(CostWeights::SFW).unwrap();
        assert!(!out.done);
        assert!(out.reward.r_d > 0.0);
        assert_eq!(out.reward.r_p, 0.0);
        assert_eq!(out.reward.r_o, 0.0);
        assert_eq!(env.inner.control_steps(), 5);
        assert!((env.inner.world.time() - 0.5).abs() < 1e-12);
    }
}
