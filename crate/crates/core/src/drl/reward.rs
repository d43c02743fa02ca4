//! Shaped reward for one agent step.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::LIDAR_MAX_RANGE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardCoefficients {
    pub c_d: f64,
    pub c_h: f64,
    pub c_v: f64,
    pub c_o: f64,
    pub c_p: f64,
    pub c_s: f64,
    pub collision: f64,
    /// Closest-person distance is floored here before inversion.
    pub person_floor: f64,
    /// No person penalty beyond this center distance.
    pub person_range: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            c_d: 10.0,
            c_h: 0.4,
            c_v: 1.0,
            c_o: 2.0,
            c_p: 2.0,
            c_s: 2.5,
            collision: -400.0,
            person_floor: 0.2,
            person_range: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_d: f64,
    pub r_h: f64,
    pub r_v: f64,
    pub r_o: f64,
    pub r_p: f64,
    pub r_s: f64,
    pub r_c: f64,
    pub total: f64,
}

/// Measurements the reward is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    /// Distance to the local waypoint before the step.
    pub d_prev: f64,
    /// Distance to the same waypoint after the step.
    pub d_now: f64,
    /// Heading error to the waypoint after the step.
    pub phi: f64,
    pub v: f64,
    pub v_max: f64,
    /// Shortest LiDAR return after the step.
    pub d_obstacle: f64,
    /// Closest pedestrian center distance after the step.
    pub d_person: Option<f64>,
    /// Social work accrued during the step.
    pub social_work: f64,
    pub collided: bool,
}

/// Heading term: 1 facing the waypoint, −1 facing away, 0 at π/4.
pub fn heading_term(phi: f64) -> f64 {
    1.0 - 2.0 * (phi / PI).abs().sqrt()
}

/// Velocity term in [−1, 0].
pub fn velocity_term(v: f64, v_max: f64) -> f64 {
    (v - v_max) / v_max
}

/// Obstacle term in [−1, 0] over the LiDAR range.
pub fn obstacle_term(d: f64) -> f64 {
    (d - LIDAR_MAX_RANGE) / LIDAR_MAX_RANGE
}

pub fn person_term(d: Option<f64>, c: &RewardCoefficients) -> f64 {
    match d {
        Some(d) if d <= c.person_range => 1.0 / d.max(c.person_floor),
        _ => 0.0,
    }
}

pub fn reward(i: &RewardInputs, c: &RewardCoefficients) -> RewardBreakdown {
    let r_d = i.d_prev - i.d_now;
    let r_h = heading_term(i.phi);
    let r_v = velocity_term(i.v, i.v_max);
    let r_o = obstacle_term(i.d_obstacle);
    let r_p = person_term(i.d_person, c);
    let r_s = i.social_work;
    let r_c = if i.collided { c.collision } else { 0.0 };
    let total = c.c_d * r_d + c.c_h * r_h + c.c_v * r_v + c.c_o * r_o - c.c_p * r_p - c.c_s * r_s + r_c;
    RewardBreakdown {
        r_d,
        r_h,
        r_v,
        r_o,
        r_p,
        r_s,
        r_c,
        total,
    }
}
