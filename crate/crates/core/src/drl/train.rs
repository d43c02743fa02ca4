//! Single-threaded training loop with periodic, resumable checkpoints.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{self, TrainProgress};
use super::env::AgentEnv;
use super::policy::{ActionSpec, PolicyMode};
use super::replay::{ReplayBuffer, Transition};
use super::reward::RewardCoefficients;
use super::sac::{SacAgent, SacHyper};
use crate::controller::CostWeights;
use crate::episode::{prepare_scenario, LoopConfig};
use crate::error::Error;
use crate::geometry::ClearanceMap;
use crate::sim::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionRange {
    /// Per-weight intervals.
    #[default]
    Table,
    /// `[0.1, 5.0]` for every weight.
    Global,
}

impl ActionRange {
    pub fn spec(self) -> ActionSpec {
        match self {
            ActionRange::Table => ActionSpec::TABLE,
            ActionRange::Global => ActionSpec::GLOBAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub episodes: u64,
    /// Library names or scenario file paths, visited round-robin.
    pub scenarios: Vec<String>,
    /// Write a checkpoint after every this many episodes (0 disables).
    pub checkpoint_every: u64,
    pub warmup_steps: u64,
    /// Random-action probability at episode 0.
    pub random_p0: f64,
    /// Episodes over which that probability decays by a factor e.
    pub random_decay: f64,
    pub action_range: ActionRange,
    pub sac: SacHyper,
    pub reward: RewardCoefficients,
    /// Simulation and controller settings; filled from the shared run file.
    #[serde(skip)]
    pub loop_cfg: LoopConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            episodes: 300,
            scenarios: vec!["orthogonal_crossing".into()],
            checkpoint_every: 50,
            warmup_steps: 1000,
            random_p0: 0.3,
            random_decay: 50.0,
            action_range: ActionRange::Table,
            sac: SacHyper::default(),
            reward: RewardCoefficients::default(),
            loop_cfg: LoopConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn random_probability(&self, episode: u64) -> f64 {
        self.random_p0 * (-(episode as f64) / self.random_decay).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: u64,
    pub scenario: String,
    pub steps: u64,
    pub ret: f64,
    pub outcome: String,
    pub mean_alpha: Option<f64>,
    pub actor_loss: Option<f64>,
    pub critic_loss: Option<f64>,
}

pub const LOG_HEADER: &str = "episode,steps,return,outcome,mean_alpha,actor_loss,critic_loss,scenario";

impl EpisodeLog {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.episode,
            self.steps,
            self.ret,
            self.outcome,
            opt(self.mean_alpha),
            opt(self.actor_loss),
            opt(self.critic_loss),
            self.scenario
        )
    }
}

/// Deterministic 64-bit mix used to derive per-episode seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: SacAgent,
    pub replay: ReplayBuffer,
    pub progress: TrainProgress,
    scenarios: Vec<(String, Arc<Scenario>, Arc<ClearanceMap>)>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, u64::MAX));
        let agent = SacAgent::new(cfg.sac, cfg.action_range.spec(), &mut rng);
        Self::with_agent(cfg, agent, None, TrainProgress::default())
    }

    /// Continues from a checkpoint written by [`Trainer::save`].
    pub fn resume(cfg: TrainConfig, path: &Path) -> Result<Self, Error> {
        let (agent, progress) = checkpoint::load_agent(path)?;
        let replay = checkpoint::load_replay(&checkpoint::replay_path(path))?;
        Self::with_agent(cfg, agent, Some(replay), progress)
    }

    fn with_agent(
        cfg: TrainConfig,
        agent: SacAgent,
        replay: Option<ReplayBuffer>,
        progress: TrainProgress,
    ) -> Result<Self, Error> {
        if cfg.scenarios.is_empty() {
            return Err(Error::Config("training needs at least one scenario".into()));
        }
        if cfg.sac.batch_size == 0 || cfg.sac.replay_capacity == 0 || cfg.sac.hidden == 0 {
            return Err(Error::Config("batch size, replay capacity and hidden width must be positive".into()));
        }
        let scenarios = cfg
            .scenarios
            .iter()
            .map(|n| prepare_scenario(n, cfg.loop_cfg.robot.radius).map(|(s, c)| (n.clone(), s, c)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            replay: replay.unwrap_or_else(|| ReplayBuffer::new(cfg.sac.replay_capacity)),
            cfg,
            agent,
            progress,
            scenarios,
        })
    }

    /// Runs the next episode, learning online after warmup.
    pub fn run_episode(&mut self) -> Result<EpisodeLog, Error> {
        let episode = self.progress.episode;
        let (name, scenario, clearance) = self.scenarios[(episode % self.scenarios.len() as u64) as usize].clone();
        let mut env = AgentEnv::new(
            scenario,
            clearance,
            &self.cfg.loop_cfg,
            self.cfg.reward,
            mix_seed(self.cfg.seed, 2 * episode),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.cfg.seed, 2 * episode + 1));
        let p_random = self.cfg.random_probability(episode);
        let spec = self.agent.policy.spec;

        let (mut ret, mut n_updates) = (0.0, 0u32);
        let (mut alpha_sum, mut actor_sum, mut critic_sum) = (0.0, 0.0, 0.0);
        let mut obs = env.observe();
        loop {
            let warm = self.progress.total_steps < self.cfg.warmup_steps;
            let action = if warm || rng.random::<f64>() < p_random {
                spec.sample_uniform(&mut rng)
            } else {
                self.agent.policy.act(&obs, PolicyMode::Stochastic, &mut rng)?.0.to_action()
            };
            let out = env.step(CostWeights::from_action(&action))?;
            let next_obs = env.observe();
            ret += out.reward.total;
            self.replay.push(Transition {
                obs,
                action,
                reward: out.reward.total,
                next_obs,
                done: out.done,
            });
            self.progress.total_steps += 1;
            if self.progress.total_steps > self.cfg.warmup_steps {
                let batch = self.replay.sample(self.cfg.sac.batch_size, &spec, &mut rng);
                let stats = self.agent.update(&batch, &mut rng)?;
                n_updates += 1;
                alpha_sum += stats.alpha;
                actor_sum += stats.actor_loss;
                critic_sum += stats.critic_loss;
            }
            obs = next_obs;
            if out.done {
                break;
            }
        }
        self.progress.episode += 1;
        let mean = |s: f64| (n_updates > 0).then(|| s / n_updates as f64);
        Ok(EpisodeLog {
            episode,
            scenario: name,
            steps: env.steps,
            ret,
            outcome: env.status().as_str().to_string(),
            mean_alpha: mean(alpha_sum),
            actor_loss: mean(actor_sum),
            critic_loss: mean(critic_sum),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        checkpoint::save_agent(path, &self.agent, self.progress)?;
        checkpoint::save_replay(&checkpoint::replay_path(path), &self.replay)?;
        Ok(())
    }

    /// Trains up to `cfg.episodes`, appending to `out_dir/train_log.csv` and
    /// writing `out_dir/checkpoints/episode_NNNNN.ckpt`.
    pub fn train(&mut self, out_dir: &Path) -> Result<Vec<EpisodeLog>, Error> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let log_path = out_dir.join("train_log.csv");
        let mut log = String::from(LOG_HEADER);
        log.push('\n');
        // Keep rows from before the resume point, drop anything later.
        if self.progress.episode > 0 {
            if let Ok(old) = fs::read_to_string(&log_path) {
                for line in old.lines().skip(1) {
                    let ep = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
                    if ep.is_some_and(|e| e < self.progress.episode) {
                        let _ = writeln!(log, "{line}");
                    }
                }
            }
        }
        fs::write(&log_path, &log).map_err(|e| Error::io(&log_path, e))?;

        let mut rows = Vec::new();
        while self.progress.episode < self.cfg.episodes {
            let row = self.run_episode()?;
            let _ = writeln!(log, "{}", row.csv_row());
            fs::write(&log_path, &log).map_err(|e| Error::io(&log_path, e))?;
            rows.push(row);
            let k = self.cfg.checkpoint_every;
            if k > 0 && (self.progress.episode % k == 0 || self.progress.episode == self.cfg.episodes) {
                self.save(&checkpoint_path(out_dir, self.progress.episode))?;
            }
        }
        Ok(rows)
    }
}

pub fn checkpoint_path(out_dir: &Path, episode: u64) -> PathBuf {
    out_dir.join("checkpoints").join(format!("episode_{episode:05}.ckpt"))
}
