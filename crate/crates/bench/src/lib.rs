//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfw_core::controller::{ControllerParams, PedestrianSnapshot, SfwController, WorldSnapshot};
use sfw_core::drl::{ActionSpec, Batch, Observation, SacAgent, SacHyper, Transition, OBS_DIM};
use sfw_core::geometry::{ClearanceMap, OccupancyGrid, Vec2};
use sfw_core::sfm::SfmParams;
use sfw_core::sim::Scenario;

/// Clearance map of a library scenario.
pub fn clearance(name: &str) -> Arc<ClearanceMap> {
    let text = sfw_core::sim::library_source(name).expect("library scenario");
    let (_, grid) = Scenario::load(text, 0.25).expect("valid scenario");
    Arc::new(ClearanceMap::new(&grid))
}

pub fn grid(name: &str) -> OccupancyGrid {
    clearance(name).grid().clone()
}

pub fn controller() -> SfwController {
    SfwController::new(ControllerParams::default())
}

/// A corridor snapshot with three approaching pedestrians.
pub fn snapshot(map: &ClearanceMap) -> WorldSnapshot<'_> {
    WorldSnapshot {
        clearance: map,
        pedestrians: vec![
            PedestrianSnapshot {
                position: Vec2::new(4.0, 1.2),
                velocity: Vec2::new(-0.9, 0.0),
                radius: 0.35,
            },
            PedestrianSnapshot {
                position: Vec2::new(5.5, 2.0),
                velocity: Vec2::new(-1.0, 0.1),
                radius: 0.35,
            },
            PedestrianSnapshot {
                position: Vec2::new(7.0, 1.5),
                velocity: Vec2::new(0.5, 0.0),
                radius: 0.35,
            },
        ],
        waypoint: Vec2::new(4.5, 1.5),
        sfm: SfmParams::default(),
    }
}

/// Full-size agent and a full batch of random transitions.
pub fn learner(seed: u64) -> (SacAgent, Batch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = SacHyper::default();
    let agent = SacAgent::new(hyper, ActionSpec::TABLE, &mut rng);
    let ts: Vec<Transition> = (0..hyper.batch_size)
        .map(|_| Transition {
            obs: Observation(std::array::from_fn(|_| rng.random_range(-1.0..3.0))),
            action: ActionSpec::TABLE.sample_uniform(&mut rng),
            reward: rng.random_range(-5.0..5.0),
            next_obs: Observation(std::array::from_fn(|_| rng.random_range(-1.0..3.0))),
            done: rng.random_bool(0.05),
        })
        .collect();
    debug_assert_eq!(ts[0].obs.0.len(), OBS_DIM);
    (agent, Batch::from_transitions(&ts, &ActionSpec::TABLE))
}
