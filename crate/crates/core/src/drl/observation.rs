//! Fixed-layout agent state.

use crate::controller::CostWeights;
use crate::geometry::{wrap_angle, Vec2, LIDAR_MAX_RANGE, LIDAR_RAYS};
use crate::nav_global::{local_waypoint, GlobalPath, DEFAULT_LOOKAHEAD};
use crate::sim::World;

pub const OBS_DIM: usize = 59;
/// Number of encoded people.
pub const MAX_PEOPLE: usize = 4;
/// People beyond this center distance are not encoded.
pub const PEOPLE_RANGE: f64 = 5.0;
/// `(angle, distance, speed, heading)` of an empty slot.
pub const PERSON_PADDING: [f64; 4] = [0.0, PEOPLE_RANGE, 0.0, 0.0];

pub const GOAL_OFFSET: usize = 0;
pub const WEIGHTS_OFFSET: usize = 2;
pub const PEOPLE_OFFSET: usize = 7;
pub const LIDAR_OFFSET: usize = PEOPLE_OFFSET + 4 * MAX_PEOPLE;

/// `[goal_angle, goal_distance, w_d, w_h, w_v, w_o, w_s,
///   4 × (angle, distance, speed, heading), 36 × range]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn goal_angle(&self) -> f64 {
        self.0[GOAL_OFFSET]
    }

    pub fn goal_distance(&self) -> f64 {
        self.0[GOAL_OFFSET + 1]
    }

    pub fn prev_weights(&self) -> CostWeights {
        let mut a = [0.0; 5];
        a.copy_from_slice(&self.0[WEIGHTS_OFFSET..WEIGHTS_OFFSET + 5]);
        CostWeights::from_action(&a)
    }

    pub fn person(&self, k: usize) -> [f64; 4] {
        let o = PEOPLE_OFFSET + 4 * k;
        [self.0[o], self.0[o + 1], self.0[o + 2], self.0[o + 3]]
    }

    pub fn lidar(&self) -> &[f64] {
        &self.0[LIDAR_OFFSET..]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Observation with the local waypoint taken from `path`.
pub fn build_observation(world: &World, prev_weights: &CostWeights, path: &GlobalPath) -> Observation {
    let waypoint = local_waypoint(path, &world.robot, DEFAULT_LOOKAHEAD);
    build_observation_at(world, prev_weights, waypoint, &world.scan())
}

pub fn build_observation_at(
    world: &World,
    prev_weights: &CostWeights,
    waypoint: Vec2,
    scan: &[f64; LIDAR_RAYS],
) -> Observation {
    let mut o = [0.0; OBS_DIM];
    let robot = world.robot;
    let rel = waypoint - robot.position();
    o[GOAL_OFFSET] = robot.bearing_to(waypoint);
    o[GOAL_OFFSET + 1] = rel.norm();
    o[WEIGHTS_OFFSET..WEIGHTS_OFFSET + 5].copy_from_slice(&prev_weights.to_action());

    let mut people: Vec<(f64, [f64; 4])> = world
        .pedestrians
        .iter()
        .filter_map(|p| {
            let d = p.agent.position.distance(robot.position());
            if d > PEOPLE_RANGE {
                return None;
            }
            let speed = p.agent.velocity.norm();
            let heading = if speed > 0.0 {
                wrap_angle(p.agent.velocity.angle() - robot.theta)
            } else {
                0.0
            };
            Some((d, [robot.bearing_to(p.agent.position), d, speed, heading]))
        })
        .collect();
    people.sort_by(|a, b| a.0.total_cmp(&b.0));
    for k in 0..MAX_PEOPLE {
        let slot = people.get(k).map_or(PERSON_PADDING, |p| p.1);
        let off = PEOPLE_OFFSET + 4 * k;
        o[off..off + 4].copy_from_slice(&slot);
    }
    for (dst, &r) in o[LIDAR_OFFSET..].iter_mut().zip(scan) {
        *dst = r.clamp(0.0, LIDAR_MAX_RANGE);
    }
    Observation(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::sim::{Perturbation, RobotSpec, Scenario};
    use std::sync::Arc;

    fn world(text: &str) -> World {
        let (sc, grid) = Scenario::load(text, 0.25).unwrap();
        World::new(Arc::new(sc), &grid, RobotSpec::default(), 0, Perturbation::NONE)
    }

    #[test]
    fn layout_offsets() {
        assert_eq!(LIDAR_OFFSET + LIDAR_RAYS, OBS_DIM);
    }

    #[test]
    fn empty_world_pads_people_and_sees_waypoint() {
        let w = world("[world]\nsize 20 20\n[robot]\nstart 10 10 0\ngoal 18 10\n");
        let o = build_observation_at(&w, &CostWeights::SFW, Vec2::new(12.0, 10.0), &w.scan());
        assert_eq!(o.goal_angle(), 0.0);
        assert_eq!(o.goal_distance(), 2.0);
        for k in 0..MAX_PEOPLE {
            assert_eq!(o.person(k), PERSON_PADDING);
        }
        assert_eq!(o.prev_weights(), CostWeights::SFW);
        assert!(o.lidar().iter().all(|&r| r == 3.0));
    }

    #[test]
    fn only_nearest_four_within_range() {
        let mut text = String::from("[world]\nsize 20 20\n[robot]\nstart 10 10 1.5707963267948966\ngoal 18 10\n");
        for x in [11.0, 14.5, 12.0, 13.0, 13.8, 16.0] {
            text.push_str(&format!("[pedestrian]\nstart {x} 10\n"));
        }
        let mut w = world(&text);
        w.robot = Pose2D::new(10.0, 10.0, std::f64::consts::FRAC_PI_2);
        let o = build_observation_at(&w, &CostWeights::DWA, Vec2::new(10.0, 12.0), &w.scan());
        let d: Vec<f64> = (0..4).map(|k| o.person(k)[1]).collect();
        for (got, want) in d.iter().zip([1.0, 2.0, 3.0, 3.8]) {
            assert!((got - want).abs() < 1e-12, "{d:?}");
        }
        // Robot faces +y, people sit on +x: they appear at −π/2.
        assert!((o.person(0)[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(o.person(0)[2], 0.0);
        assert_eq!(o.person(0)[3], 0.0);
    }
}
