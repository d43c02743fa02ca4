//! Adaptive weight agent: state, reward, soft actor-critic, replay,
//! checkpoints and the training loop.

pub mod checkpoint;
pub mod env;
pub mod nn;
pub mod observation;
pub mod policy;
pub mod replay;
pub mod reward;
pub mod sac;
pub mod train;

pub use checkpoint::{infer_weights, load_agent, load_policy, save_agent, TrainProgress};
pub use env::{AgentEnv, StepOutcome, AGENT_DT};
pub use observation::{build_observation, build_observation_at, Observation, OBS_DIM};
pub use policy::{ActionSpec, Policy, PolicyMode, ACTION_DIM};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use reward::{reward, RewardBreakdown, RewardCoefficients, RewardInputs};
pub use sac::{SacAgent, SacHyper, UpdateStats};
pub use train::{EpisodeLog, TrainConfig, Trainer};
