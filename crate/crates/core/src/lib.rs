//! Social navigation workbench: a dynamic-window local planner with a
//! social-force cost, a Soft Actor-Critic agent that retunes the planner's
//! cost weights online, a deterministic 2D simulator with SFM pedestrians,
//! and the harness that benchmarks DWA, SFW and SFW-SAC against each other.

pub mod bench;
pub mod config;
pub mod controller;
pub mod drl;
pub mod episode;
pub mod error;
pub mod geometry;
pub mod nav_global;
pub mod sfm;
pub mod sim;

pub use controller::{ControllerParams, CostWeights, SfwController, Trajectory};
pub use error::{Error, Result};
pub use geometry::{OccupancyGrid, Pose2D, Vec2, VelocityCommand};
pub use sim::{EpisodeStatus, Scenario, World};
pub use bench::{EpisodeRecord, Method, RunReport, SuiteConfig};
pub use config::RunConfig;
pub use drl::{ActionSpec, Observation, SacAgent, TrainConfig};
pub use episode::{ClosedLoop, LoopConfig};
