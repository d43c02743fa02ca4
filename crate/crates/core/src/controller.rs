//! Social Force Window local planner.
//!
//! A dynamic-window planner: reachable `(v, ω)` pairs are sampled, each is
//! rolled out as a constant-curvature arc, scored with five normalized cost
//! terms, and the cheapest feasible arc wins:
//!
//! `J = C_s·w_s + C_o·w_o + C_v·w_v + C_d·w_d + C_h·w_h`
//!
//! `C_s` is the social work accumulated along the rollout. With `w_s = 0` the
//! planner is the plain DWA baseline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, ClearanceMap, Pose2D, Vec2, VelocityCommand, LIDAR_MAX_RANGE};
use crate::sfm::{self, SfmAgent, SfmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    pub v_max: f64,
    pub v_min: f64,
    pub w_max: f64,
    pub sim_time: f64,
    pub rollout_dt: f64,
    pub waypoint_lookahead: f64,
    pub accel_v: f64,
    pub accel_w: f64,
    pub control_dt: f64,
    pub n_v_samples: usize,
    pub n_w_samples: usize,
    pub robot_radius: f64,
    /// Clearance at which the inflation cost reaches zero.
    pub inflation_clearance: f64,
    /// Normalization constant for the social-work cost.
    pub social_norm: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            v_max: 0.6,
            v_min: 0.08,
            w_max: 1.5,
            sim_time: 2.5,
            rollout_dt: 0.1,
            waypoint_lookahead: 2.0,
            accel_v: 1.0,
            accel_w: 2.0,
            control_dt: 0.1,
            n_v_samples: 10,
            n_w_samples: 20,
            robot_radius: 0.25,
            inflation_clearance: 0.55,
            social_norm: 50.0,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.v_min < self.v_max) {
            return Err(format!("v_min ({}) must be below v_max ({})", self.v_min, self.v_max));
        }
        if !(self.sim_time > self.control_dt) {
            return Err("sim_time must exceed control_dt".into());
        }
        if self.rollout_dt <= 0.0 || self.control_dt <= 0.0 {
            return Err("time steps must be positive".into());
        }
        if self.n_v_samples == 0 || self.n_w_samples == 0 {
            return Err("sample counts must be positive".into());
        }
        if self.social_norm <= 0.0 || self.inflation_clearance <= 0.0 {
            return Err("normalization constants must be positive".into());
        }
        Ok(())
    }

    /// Number of rollout poses including the start.
    pub fn rollout_len(&self) -> usize {
        (self.sim_time / self.rollout_dt).round() as usize + 1
    }
}

/// The five planner weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub w_s: f64,
    pub w_o: f64,
    pub w_v: f64,
    pub w_d: f64,
    pub w_h: f64,
}

impl CostWeights {
    /// Hand-tuned static profile of the SFW planner.
    pub const SFW: CostWeights = CostWeights {
        w_s: 2.0,
        w_o: 2.0,
        w_v: 0.8,
        w_d: 1.0,
        w_h: 0.6,
    };

    /// Same profile with the social term switched off.
    pub const DWA: CostWeights = CostWeights {
        w_s: 0.0,
        ..Self::SFW
    };

    /// Agent action order: `[w_d, w_h, w_v, w_o, w_s]`.
    pub fn to_action(&self) -> [f64; 5] {
        [self.w_d, self.w_h, self.w_v, self.w_o, self.w_s]
    }

    pub fn from_action(a: &[f64; 5]) -> Self {
        Self {
            w_d: a[0],
            w_h: a[1],
            w_v: a[2],
            w_o: a[3],
            w_s: a[4],
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_s: self.w_s * k,
            w_o: self.w_o * k,
            w_v: self.w_v * k,
            w_d: self.w_d * k,
            w_h: self.w_h * k,
        }
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::SFW
    }
}

/// Whether the social-work term is part of the cost at all. `Deleted` is the
/// reference baseline with the term removed from the code path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SocialTerm {
    #[default]
    Enabled,
    Deleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTerms {
    pub social: f64,
    pub obstacle: f64,
    pub velocity: f64,
    pub distance: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub command: VelocityCommand,
    pub poses: Vec<Pose2D>,
    pub costs: CostTerms,
    /// Weighted cost, `None` when the arc collides.
    pub total: Option<f64>,
}

impl Trajectory {
    pub fn is_feasible(&self) -> bool {
        self.total.is_some()
    }

    pub fn total_or_inf(&self) -> f64 {
        self.total.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedestrianSnapshot {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Everything a selection cycle reads; immutable for the whole cycle.
#[derive(Debug, Clone)]
pub struct WorldSnapshot<'a> {
    pub clearance: &'a ClearanceMap,
    pub pedestrians: Vec<PedestrianSnapshot>,
    pub waypoint: Vec2,
    pub sfm: SfmParams,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub command: VelocityCommand,
    /// Index of the winning trajectory; `None` means recovery.
    pub best: Option<usize>,
    pub trajectories: Vec<Trajectory>,
}

impl Selection {
    pub fn best_trajectory(&self) -> Option<&Trajectory> {
        self.best.map(|i| &self.trajectories[i])
    }

    pub fn is_recovery(&self) -> bool {
        self.best.is_none()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi - lo < 1e-12 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Commands reachable within one control period, on a uniform grid with the
/// window corners included. Ordered by `v` then `ω`.
pub fn dynamic_window(current: VelocityCommand, p: &ControllerParams) -> Vec<VelocityCommand> {
    let v_lo = p.v_min.max(current.v - p.accel_v * p.control_dt).min(p.v_max);
    let v_hi = p.v_max.min(current.v + p.accel_v * p.control_dt).max(v_lo);
    let w_lo = (-p.w_max).max(current.w - p.accel_w * p.control_dt).min(p.w_max);
    let w_hi = p.w_max.min(current.w + p.accel_w * p.control_dt).max(w_lo);
    let ws = linspace(w_lo, w_hi, p.n_w_samples);
    linspace(v_lo, v_hi, p.n_v_samples)
        .into_iter()
        .flat_map(|v| ws.iter().map(move |&w| VelocityCommand::new(v, w)))
        .collect()
}

/// Pose after following `cmd` for `t` seconds from `start`.
pub fn arc_pose(start: &Pose2D, cmd: VelocityCommand, t: f64) -> Pose2D {
    if cmd.w.abs() < 1e-6 {
        let d = cmd.v * t;
        Pose2D::new(
            start.x + d * start.theta.cos(),
            start.y + d * start.theta.sin(),
            start.theta + cmd.w * t,
        )
    } else {
        let r = cmd.v / cmd.w;
        let th = start.theta + cmd.w * t;
        Pose2D::new(
            start.x + r * (th.sin() - start.theta.sin()),
            start.y - r * (th.cos() - start.theta.cos()),
            th,
        )
    }
}

/// Closed-form constant-`(v, ω)` rollout, start pose included.
pub fn rollout(cmd: VelocityCommand, start: &Pose2D, p: &ControllerParams) -> Vec<Pose2D> {
    (0..p.rollout_len())
        .map(|k| arc_pose(start, cmd, k as f64 * p.rollout_dt))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwController {
    pub params: ControllerParams,
    pub social: SocialTerm,
}

impl SfwController {
    pub fn new(params: ControllerParams) -> Self {
        Self {
            params,
            social: SocialTerm::Enabled,
        }
    }

    pub fn with_social_term(mut self, social: SocialTerm) -> Self {
        self.social = social;
        self
    }

    /// Scores one rollout. Poses after the start are checked against the
    /// static map and against pedestrians extrapolated at constant velocity.
    pub fn score_trajectory(
        &self,
        poses: Vec<Pose2D>,
        cmd: VelocityCommand,
        snap: &WorldSnapshot<'_>,
        weights: &CostWeights,
    ) -> Trajectory {
        let p = &self.params;
        let mut obstacle_cost: f64 = 0.0;
        let mut feasible = true;
        let mut social_work = 0.0;
        let mut peds: Vec<SfmAgent> = Vec::with_capacity(snap.pedestrians.len());

        for (k, pose) in poses.iter().enumerate().skip(1) {
            let t = k as f64 * p.rollout_dt;
            let pos = pose.position();
            let obstacle_point = snap.clearance.nearest_obstacle_point(pos);
            let static_clearance = obstacle_point.distance(pos);
            if static_clearance < p.robot_radius {
                feasible = false;
                break;
            }
            let mut clearance = static_clearance - p.robot_radius;
            peds.clear();
            for ped in &snap.pedestrians {
                let q = ped.position + ped.velocity * t;
                let d = q.distance(pos) - p.robot_radius - ped.radius;
                if d < 0.0 {
                    feasible = false;
                    break;
                }
                clearance = clearance.min(d);
                peds.push(SfmAgent {
                    position: q,
                    velocity: ped.velocity,
                    desired_speed: ped.velocity.norm(),
                    goal: q,
                    radius: ped.radius,
                });
            }
            if !feasible {
                break;
            }
            obstacle_cost = obstacle_cost.max((1.0 - clearance / p.inflation_clearance).clamp(0.0, 1.0));

            if self.social == SocialTerm::Enabled {
                let robot = SfmAgent {
                    position: pos,
                    velocity: pose.heading() * cmd.v,
                    desired_speed: p.v_max,
                    goal: snap.waypoint,
                    radius: p.robot_radius,
                };
                let obstacle = (static_clearance <= LIDAR_MAX_RANGE).then_some(obstacle_point);
                social_work += sfm::social_work_at(&robot, &peds, obstacle, &snap.sfm);
            }
        }

        let end = poses.last().copied().unwrap_or_default();
        let to_wp = snap.waypoint - end.position();
        let dist = to_wp.norm();
        let heading_err = if dist < 1e-9 {
            0.0
        } else {
            wrap_angle(to_wp.angle() - end.theta).abs()
        };
        let costs = CostTerms {
            social: (social_work / p.social_norm).min(1.0),
            obstacle: obstacle_cost,
            velocity: ((p.v_max - cmd.v) / p.v_max).clamp(0.0, 1.0),
            distance: (dist / p.waypoint_lookahead).min(1.0),
            heading: heading_err / PI,
        };
        let total = feasible.then(|| self.weighted(&costs, weights));
        Trajectory {
            command: cmd,
            poses,
            costs,
            total,
        }
    }

    fn weighted(&self, c: &CostTerms, w: &CostWeights) -> f64 {
        match self.social {
            SocialTerm::Enabled => {
                c.social * w.w_s + c.obstacle * w.w_o + c.velocity * w.w_v + c.distance * w.w_d + c.heading * w.w_h
            }
            SocialTerm::Deleted => c.obstacle * w.w_o + c.velocity * w.w_v + c.distance * w.w_d + c.heading * w.w_h,
        }
    }

    /// Recovery command used when no sampled arc is feasible.
    pub fn recovery(&self) -> VelocityCommand {
        VelocityCommand::new(0.0, 0.5 * self.params.w_max)
    }

    /// Scores the whole window and returns the cheapest feasible command.
    pub fn select_command(
        &self,
        window: &[VelocityCommand],
        start: &Pose2D,
        snap: &WorldSnapshot<'_>,
        weights: &CostWeights,
    ) -> Selection {
        let trajectories: Vec<Trajectory> = window
            .iter()
            .map(|&cmd| self.score_trajectory(rollout(cmd, start, &self.params), cmd, snap, weights))
            .collect();
        let best = best_index(&trajectories);
        let command = best.map_or_else(|| self.recovery(), |i| trajectories[i].command);
        Selection {
            command,
            best,
            trajectories,
        }
    }

    /// Full cycle from the current command.
    pub fn plan(
        &self,
        current: VelocityCommand,
        start: &Pose2D,
        snap: &WorldSnapshot<'_>,
        weights: &CostWeights,
    ) -> Selection {
        let window = dynamic_window(current, &self.params);
        self.select_command(&window, start, snap, weights)
    }
}

/// True when `a` should be preferred over `b`: lower cost, then higher `v`,
/// then smaller `|ω|`. Sample order breaks remaining ties (callers scan in
/// order and only replace on strict preference).
pub fn prefer(a: &Trajectory, b: &Trajectory) -> bool {
    match (a.total, b.total) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(ta), Some(tb)) => {
            if ta != tb {
                return ta < tb;
            }
            if a.command.v != b.command.v {
                return a.command.v > b.command.v;
            }
            a.command.w.abs() < b.command.w.abs()
        }
    }
}

fn best_index(trajectories: &[Trajectory]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in trajectories.iter().enumerate() {
        if !t.is_feasible() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) if prefer(t, &trajectories[b]) => best = Some(i),
            _ => {}
        }
    }
    best
}
