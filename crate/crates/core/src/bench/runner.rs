//! Single episodes and seeded suites for the three planners.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{aggregate, Aggregate, EpisodeRecord, Method};
use super::trace::{Trace, TraceMeta};
use crate::controller::{CostWeights, SocialTerm};
use crate::drl::{load_policy, AgentEnv, Policy, RewardCoefficients};
use crate::episode::{prepare_scenario, ClosedLoop, LoopConfig};
use crate::error::Error;
use crate::geometry::ClearanceMap;
use crate::sim::{EpisodeStatus, Scenario};

/// Everything measured in one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub record: EpisodeRecord,
    pub status: EpisodeStatus,
    /// Elapsed time, also on failure.
    pub time: f64,
    pub path_length: f64,
    pub control_steps: u64,
    pub proxemic_steps: [u64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRun {
    pub metrics: EpisodeMetrics,
    pub trace: Trace,
    /// Commands issued by the controller, in order.
    pub commands: Vec<crate::geometry::VelocityCommand>,
}

/// Fixed weight profile of the hand-tuned planner; DWA is the same profile
/// with the social weight at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerWeights {
    pub sfw: CostWeights,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self { sfw: CostWeights::SFW }
    }
}

impl PlannerWeights {
    pub fn dwa(&self) -> CostWeights {
        CostWeights { w_s: 0.0, ..self.sfw }
    }
}

fn finish(name: &str, method: Method, seed: u64, lp: ClosedLoop) -> EpisodeRun {
    let w = &lp.world;
    let status = w.status;
    let success = status == EpisodeStatus::Success;
    let n = lp.control_steps();
    let sw_raw = lp.social_work.total();
    let sw_step = sw_raw / n as f64;
    // Reported as the product so that sw_step · steps reproduces it exactly.
    let sw_total = sw_step * n as f64;
    let frac = lp.proxemics.map(|c| c as f64 / n as f64);
    let time = w.time();
    let record = EpisodeRecord {
        scenario: name.to_string(),
        method,
        seed,
        success,
        time_s: success.then_some(time),
        path_m: success.then_some(lp.path_length),
        v_avg: success.then(|| lp.path_length / time),
        sw_total,
        sw_step,
        prox_intimate: frac[0],
        prox_personal: frac[1],
        prox_social: frac[2],
        prox_public: frac[3],
    };
    let meta = TraceMeta {
        scenario: name.to_string(),
        method,
        seed,
        status,
        robot_radius: w.spec.radius,
        goal_tolerance: w.spec.goal_tolerance,
        goal: [w.goal().x, w.goal().y],
        pedestrian_radii: w.pedestrians.iter().map(|p| p.agent.radius).collect(),
        path: lp.path.waypoints.iter().map(|p| [p.x, p.y]).collect(),
        scenario_text: w.scenario.to_text(),
        control_steps: n,
        proxemic_steps: lp.proxemics,
        sw_total,
        sw_step,
        path_length: lp.path_length,
    };
    EpisodeRun {
        metrics: EpisodeMetrics {
            record,
            status,
            time,
            path_length: lp.path_length,
            control_steps: n,
            proxemic_steps: lp.proxemics,
        },
        trace: Trace {
            meta,
            rows: lp.trace,
        },
        commands: lp.commands,
    }
}

/// Runs one episode on an already prepared scenario.
#[allow(clippy::too_many_arguments)]
pub fn run_prepared(
    name: &str,
    scenario: Arc<Scenario>,
    clearance: Arc<ClearanceMap>,
    method: Method,
    seed: u64,
    policy: Option<&Policy>,
    cfg: &LoopConfig,
    weights: &PlannerWeights,
) -> Result<EpisodeRun, Error> {
    match method {
        Method::Dwa | Method::Sfw => {
            let w = if method == Method::Dwa { weights.dwa() } else { weights.sfw };
            let mut lp = ClosedLoop::new(scenario, clearance, cfg, SocialTerm::Enabled, w, seed)?;
            lp.run_to_end()?;
            Ok(finish(name, method, seed, lp))
        }
        Method::SfwSac => {
            let policy = policy.ok_or_else(|| Error::Config("method sfw-sac requires a checkpoint".into()))?;
            let mut env = AgentEnv::new(scenario, clearance, cfg, RewardCoefficients::default(), seed)?;
            while !env.status().is_terminal() {
                let w = policy.deterministic(&env.observe())?;
                env.step(w)?;
            }
            Ok(finish(name, method, seed, env.inner))
        }
    }
}

/// Loads the scenario (library name or file) and, for `sfw-sac`, the policy.
pub fn run_episode(
    scenario: &str,
    method: Method,
    seed: u64,
    checkpoint: Option<&Path>,
    cfg: &LoopConfig,
    weights: &PlannerWeights,
) -> Result<EpisodeRun, Error> {
    let (sc, clearance) = prepare_scenario(scenario, cfg.robot.radius)?;
    let policy = match (method, checkpoint) {
        (Method::SfwSac, Some(p)) => Some(load_policy(p)?),
        (Method::SfwSac, None) => return Err(Error::Config("method sfw-sac requires a checkpoint".into())),
        _ => None,
    };
    run_prepared(scenario, sc, clearance, method, seed, policy.as_ref(), cfg, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Library names or scenario files; empty means the whole library.
    pub scenarios: Vec<String>,
    pub methods: Vec<Method>,
    pub n_seeds: u64,
    pub first_seed: u64,
    pub checkpoint: Option<PathBuf>,
    /// Write a trace per episode under `traces/`.
    pub traces: bool,
    pub weights: PlannerWeights,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenarios: Vec::new(),
            methods: vec![Method::Dwa, Method::Sfw],
            n_seeds: 10,
            first_seed: 1,
            checkpoint: None,
            traces: false,
            weights: PlannerWeights::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEpisode {
    pub record: EpisodeRecord,
    /// Why the episode could not run, if it failed before starting or midway.
    pub error: Option<String>,
    pub run: Option<EpisodeRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub episodes: Vec<SuiteEpisode>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn records(&self) -> Vec<EpisodeRecord> {
        self.episodes.iter().map(|e| e.record.clone()).collect()
    }
}

fn error_record(scenario: &str, method: Method, seed: u64) -> EpisodeRecord {
    EpisodeRecord {
        scenario: scenario.to_string(),
        method,
        seed,
        success: false,
        time_s: None,
        path_m: None,
        v_avg: None,
        sw_total: 0.0,
        sw_step: 0.0,
        prox_intimate: 0.0,
        prox_personal: 0.0,
        prox_social: 0.0,
        prox_public: 1.0,
    }
}

/// All `scenario × method × seed` episodes, in parallel; rows come back
/// ordered by scenario (config order), method, seed. Failures become rows.
pub fn run_suite(cfg: &SuiteConfig, loop_cfg: &LoopConfig, keep_runs: bool) -> Result<RunReport, Error> {
    let names: Vec<String> = if cfg.scenarios.is_empty() {
        crate::sim::scenario_names().map(String::from).collect()
    } else {
        cfg.scenarios.clone()
    };
    if cfg.methods.is_empty() || cfg.n_seeds == 0 {
        return Err(Error::Config("suite needs at least one method and one seed".into()));
    }
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let policy = match (&cfg.checkpoint, methods.contains(&Method::SfwSac)) {
        (Some(p), true) => Some(load_policy(p)?),
        (None, true) => return Err(Error::Config("method sfw-sac requires a checkpoint".into())),
        _ => None,
    };
    let prepared: Vec<(String, Result<(Arc<Scenario>, Arc<ClearanceMap>), String>)> = names
        .iter()
        .map(|n| (n.clone(), prepare_scenario(n, loop_cfg.robot.radius).map_err(|e| e.to_string())))
        .collect();

    let mut jobs = Vec::new();
    for (si, _) in prepared.iter().enumerate() {
        for &m in &methods {
            for seed in cfg.first_seed..cfg.first_seed + cfg.n_seeds {
                jobs.push((si, m, seed));
            }
        }
    }
    let episodes: Vec<SuiteEpisode> = jobs
        .par_iter()
        .map(|&(si, m, seed)| {
            let (name, prep) = &prepared[si];
            let outcome = prep.clone().and_then(|(sc, cl)| {
                let run = run_prepared(name, sc, cl, m, seed, policy.as_ref(), loop_cfg, &cfg.weights)
                    .map_err(|e| e.to_string())?;
                super::check_consistency(&run).map_err(|e| format!("inconsistent metrics: {e}"))?;
                Ok(run)
            });
            match outcome {
                Ok(run) => SuiteEpisode {
                    record: run.metrics.record.clone(),
                    error: None,
                    run: keep_runs.then_some(run),
                },
                Err(e) => SuiteEpisode {
                    record: error_record(name, m, seed),
                    error: Some(e),
                    run: None,
                },
            }
        })
        .collect();
    let records: Vec<EpisodeRecord> = episodes.iter().map(|e| e.record.clone()).collect();
    Ok(RunReport {
        aggregates: aggregate(&records),
        episodes,
    })
}

/// File name stem used for per-episode traces.
pub fn trace_file_name(scenario: &str, method: Method, seed: u64) -> String {
    let stem: String = scenario
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{stem}__{}__{seed}.csv", method.as_str())
}
