//! Run configuration file (TOML) shared by suites and training.
//!
//! ```toml
//! [loop.controller]      # planner limits and sampling
//! v_max = 0.6
//! [loop.jitter]          # seeded scenario perturbation
//! position = 0.2
//! [suite]
//! scenarios = ["frontal_passing", "overtaking"]
//! methods = ["dwa", "sfw"]
//! n_seeds = 10
//! [train]
//! seed = 7
//! episodes = 300
//! scenarios = ["orthogonal_crossing"]
//! [train.sac]
//! batch_size = 256
//! ```
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::SuiteConfig;
use crate::drl::TrainConfig;
use crate::episode::LoopConfig;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "loop")]
    pub loop_cfg: LoopConfig,
    pub suite: SuiteConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.loop_cfg.controller.validate().map_err(Error::Config)?;
        let t = &self.train;
        if !(t.random_decay > 0.0) || !(0.0..=1.0).contains(&t.random_p0) {
            return Err(Error::Config("train.random_decay must be positive and random_p0 in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&t.sac.tau) || !(0.0..=1.0).contains(&t.sac.gamma) || t.sac.lr < 0.0 {
            return Err(Error::Config("train.sac: tau and gamma must be in [0, 1], lr non-negative".into()));
        }
        if !(t.sac.initial_alpha > 0.0) {
            return Err(Error::Config("train.sac.initial_alpha must be positive".into()));
        }
        Ok(())
    }

    /// Training settings with the shared loop settings applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loop_cfg: self.loop_cfg,
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Method;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_file_and_round_trip() {
        let cfg = RunConfig::parse(
            "[suite]\nmethods = [\"sfw-sac\"]\nn_seeds = 3\n[train]\nepisodes = 5\n[train.sac]\nbatch_size = 32\n[loop.controller]\nv_max = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.suite.methods, vec![Method::SfwSac]);
        assert_eq!(cfg.train.sac.batch_size, 32);
        assert_eq!(cfg.train.sac.gamma, 0.99);
        assert_eq!(cfg.train_config().loop_cfg.controller.v_max, 0.5);
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::parse("[suite]\nseeds = 3\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[train]\nrandom_decay = 0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[loop.controller]\nv_max = -1\n"), Err(Error::Config(_))));
    }
}
