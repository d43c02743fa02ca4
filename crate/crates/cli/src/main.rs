use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sfw_core::bench::{self, Method, PlannerWeights, Trace};
use sfw_core::drl::Trainer;
use sfw_core::{Error, RunConfig};

#[derive(Parser)]
#[command(name = "sfw", version, about = "Social navigation workbench: DWA, SFW and SFW-SAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode and print its metrics.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Trained policy, required for sfw-sac.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory for the trace, its metadata and a one-row metrics CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run configuration (loop and planner weights).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every scenario × method × seed of a configuration.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// First seed; overrides the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the weight-tuning agent.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Checkpoint to continue from.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides the configured training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw an episode trace as SVG.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in scenarios.
    Scenarios,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Usage-level failure (exit 2) versus runtime failure (exit 1).
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file not found: {}", path.display())));
    }
    RunConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scenarios => {
            for name in sfw_core::sim::scenario_names() {
                println!("{name}");
            }
        }
        Command::Run {
            scenario,
            method,
            seed,
            checkpoint,
            out,
            config,
        } => {
            let cfg = match &config {
                Some(p) => load_config(p)?,
                None => RunConfig::default(),
            };
            let weights: PlannerWeights = cfg.suite.weights;
            let run = bench::run_episode(&scenario, method, seed, checkpoint.as_deref(), &cfg.loop_cfg, &weights)?;
            bench::check_consistency(&run).map_err(|e| Failure::Runtime(Error::Invalid(e)))?;
            let r = &run.metrics.record;
            println!(
                "scenario={} method={} seed={} status={} time_s={} path_m={} v_avg={} sw_total={:.4} sw_step={:.4} prox={:.3}/{:.3}/{:.3}/{:.3}",
                r.scenario,
                r.method,
                r.seed,
                run.metrics.status.as_str(),
                fmt_opt(r.time_s),
                fmt_opt(r.path_m),
                fmt_opt(r.v_avg),
                r.sw_total,
                r.sw_step,
                r.prox_intimate,
                r.prox_personal,
                r.prox_social,
                r.prox_public
            );
            if let Some(dir) = out {
                let name = bench::runner::trace_file_name(&r.scenario, r.method, r.seed);
                run.trace.write(&dir.join(&name))?;
                write_file(
                    &dir.join(name.replace(".csv", ".metrics.csv")),
                    &bench::report::episodes_csv(std::slice::from_ref(r))?,
                )?;
            }
        }
        Command::Suite { config, out_dir, seed } => {
            let cfg = load_config(&config)?;
            let mut suite = cfg.suite.clone();
            if let Some(s) = seed {
                suite.first_seed = s;
            }
            let report = bench::run_suite(&suite, &cfg.loop_cfg, suite.traces)?;
            bench::write_report(&report, &out_dir)?;
            let failed = report.episodes.iter().filter(|e| e.error.is_some()).count();
            for a in &report.aggregates {
                println!(
                    "{:<24} {:<8} success={:>5.1}% time_s={} path_m={} v_avg={} sw_step={:.4}",
                    a.scenario,
                    a.method.as_str(),
                    a.success_pct,
                    fmt_opt(a.time_s),
                    fmt_opt(a.path_m),
                    fmt_opt(a.v_avg),
                    a.sw_step
                );
            }
            println!(
                "{} episodes written to {} ({failed} could not run)",
                report.episodes.len(),
                out_dir.display()
            );
        }
        Command::Train {
            config,
            out_dir,
            resume,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let mut train = cfg.train_config();
            if let Some(s) = seed {
                train.seed = s;
            }
            let mut trainer = match &resume {
                Some(p) => Trainer::resume(train, p)?,
                None => Trainer::new(train)?,
            };
            let rows = trainer.train(&out_dir)?;
            let n = rows.len().max(1) as f64;
            let collisions = rows.iter().filter(|r| r.outcome == "collision").count();
            println!(
                "trained {} episodes (now at {}), mean return {:.2}, collisions {collisions}; log at {}",
                rows.len(),
                trainer.progress.episode,
                rows.iter().map(|r| r.ret).sum::<f64>() / n,
                out_dir.join("train_log.csv").display()
            );
        }
        Command::Plot { trace, out } => {
            let t = Trace::read(&trace)?;
            write_file(&out, &bench::plot_episode(&t)?)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
