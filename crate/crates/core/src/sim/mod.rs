//! Deterministic episode engine and the built-in scenario library.

mod scenario;
mod world;

pub use scenario::{
    Obstacle, PedestrianSpec, Scenario, DEFAULT_MAX_DURATION, DEFAULT_PEDESTRIAN_RADIUS, DEFAULT_PEDESTRIAN_SPEED,
};
pub use world::{ray_circle, EpisodeStatus, Perturbation, RobotSpec, World};

use crate::error::ScenarioError;

/// Scenario documents shipped with the crate, in library order.
pub const LIBRARY_SOURCES: [(&str, &str); 12] = [
    ("free_space", include_str!("../../scenarios/free_space.scn")),
    ("frontal_passing", include_str!("../../scenarios/frontal_passing.scn")),
    ("overtaking", include_str!("../../scenarios/overtaking.scn")),
    ("orthogonal_crossing", include_str!("../../scenarios/orthogonal_crossing.scn")),
    ("static_blocker", include_str!("../../scenarios/static_blocker.scn")),
    ("narrow_curved_passage", include_str!("../../scenarios/narrow_curved_passage.scn")),
    ("mixed_crowd", include_str!("../../scenarios/mixed_crowd.scn")),
    ("open_passing", include_str!("../../scenarios/open_passing.scn")),
    ("corridor_crossing", include_str!("../../scenarios/corridor_crossing.scn")),
    ("doorway_passing", include_str!("../../scenarios/doorway_passing.scn")),
    ("group_overtaking", include_str!("../../scenarios/group_overtaking.scn")),
    ("busy_corridor", include_str!("../../scenarios/busy_corridor.scn")),
];

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    LIBRARY_SOURCES.iter().map(|(n, _)| *n)
}

/// All twelve library scenarios, parsed.
pub fn scenario_library() -> Vec<Scenario> {
    LIBRARY_SOURCES
        .iter()
        .map(|(_, text)| Scenario::parse(text).expect("library scenarios are well-formed"))
        .collect()
}

pub fn library_source(name: &str) -> Result<&'static str, ScenarioError> {
    LIBRARY_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ScenarioError::Unknown(name.to_string()))
}

pub fn find_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    Scenario::parse(library_source(name)?)
}
