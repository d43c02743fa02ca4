//! Benchmark harness: episodes and suites for DWA, SFW and SFW-SAC, CSV
//! reports, trajectory traces and SVG plots.

pub mod plot;
pub mod report;
pub mod runner;
pub mod trace;

use std::fs;
use std::path::Path;

pub use plot::plot_episode;
pub use report::{aggregate, Aggregate, EpisodeRecord, Method, EPISODE_HEADER};
pub use runner::{run_episode, run_prepared, run_suite, EpisodeMetrics, EpisodeRun, PlannerWeights, RunReport, SuiteConfig};
pub use trace::{Trace, TraceMeta};

use crate::episode::{proxemic_zone, PROXEMIC_BOUNDS};
use crate::error::Error;
use crate::geometry::Vec2;

/// Proxemic step counts recomputed from the control rows of a trace.
pub fn recount_proxemics(trace: &Trace) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let r = trace.meta.robot_radius;
    for row in trace.rows.iter().filter(|row| row.control) {
        let robot = Vec2::new(row.x, row.y);
        let d = row
            .pedestrians
            .iter()
            .zip(&trace.meta.pedestrian_radii)
            .map(|(p, pr)| p.distance(robot) - r - pr)
            .min_by(f64::total_cmp);
        counts[proxemic_zone(d)] += 1;
    }
    debug_assert_eq!(PROXEMIC_BOUNDS.len(), 3);
    counts
}

/// Invariants every finished episode must satisfy; returns the first broken
/// one.
pub fn check_consistency(run: &EpisodeRun) -> Result<(), String> {
    let m = &run.metrics;
    let rec = &m.record;
    let prox = rec.proxemics();
    let sum: f64 = prox.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || prox.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(format!("proxemic fractions sum to {sum}"));
    }
    if rec.sw_step * m.control_steps as f64 != rec.sw_total {
        return Err("sw_step * steps differs from sw_total".into());
    }
    if run.trace.control_rows() as u64 != m.control_steps {
        return Err("trace control rows differ from control steps".into());
    }
    let recomputed = run.trace.path_length();
    if (recomputed - m.path_length).abs() > 1e-9 {
        return Err(format!("path length {} vs trace {recomputed}", m.path_length));
    }
    let counts = recount_proxemics(&run.trace);
    if counts != m.proxemic_steps {
        return Err(format!("proxemic counts {:?} vs trace {counts:?}", m.proxemic_steps));
    }
    let n = m.control_steps as f64;
    if counts.map(|c| c as f64 / n) != prox {
        return Err("proxemic fractions differ from trace recount".into());
    }
    Ok(())
}

/// Writes `episodes.csv`, `aggregates.csv`, `errors.txt` (when any episode
/// failed to run) and, if present, per-episode traces under `traces/`.
pub fn write_report(report: &RunReport, out_dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, text: String| {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("episodes.csv", report::episodes_csv(&report.records())?)?;
    write("aggregates.csv", report::aggregates_csv(&report.aggregates)?)?;
    let errors: Vec<String> = report
        .episodes
        .iter()
        .filter_map(|e| {
            e.error
                .as_ref()
                .map(|msg| format!("{},{},{}: {msg}", e.record.scenario, e.record.method, e.record.seed))
        })
        .collect();
    if !errors.is_empty() {
        write("errors.txt", errors.join("\n") + "\n")?;
    }
    for e in &report.episodes {
        if let Some(run) = &e.run {
            let name = runner::trace_file_name(&e.record.scenario, e.record.method, e.record.seed);
            run.trace.write(&out_dir.join("traces").join(name))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::LoopConfig;
    use crate::sim::EpisodeStatus;

    fn run(name: &str, method: Method, seed: u64) -> EpisodeRun {
        run_episode(name, method, seed, None, &LoopConfig::default(), &PlannerWeights::default()).unwrap()
    }

    #[test]
    fn free_space_succeeds_with_consistent_metrics() {
        for m in [Method::Dwa, Method::Sfw] {
            let r = run("free_space", m, 1);
            assert_eq!(r.metrics.status, EpisodeStatus::Success);
            check_consistency(&r).unwrap();
            let v = r.metrics.record.v_avg.unwrap();
            assert!(v > 0.45 && v <= 0.6, "{v}");
        }
    }

    #[test]
    fn episodes_are_deterministic() {
        let a = run("frontal_passing", Method::Sfw, 3);
        let b = run("frontal_passing", Method::Sfw, 3);
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn trace_files_round_trip_and_plot() {
        let dir = tempfile::tempdir().unwrap();
        let r = run("orthogonal_crossing", Method::Sfw, 2);
        let p = dir.path().join("t.csv");
        r.trace.write(&p).unwrap();
        let back = Trace::read(&p).unwrap();
        assert_eq!(back.meta, r.trace.meta);
        assert_eq!(back.rows, r.trace.rows);
        let svg = plot_episode(&back).unwrap();
        assert_eq!(svg, plot_episode(&r.trace).unwrap());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let labels: Vec<&str> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("robot-index"))
            .filter_map(|n| n.text())
            .collect();
        assert_eq!(labels, ["1", "2", "3"]);
        assert!(doc.descendants().any(|n| n.tag_name().name() == "ellipse"));
        assert!(doc.descendants().any(|n| n.attribute("id") == Some("goal")));
    }

    #[test]
    fn empty_trace_cannot_be_plotted() {
        let mut t = run("free_space", Method::Dwa, 1).trace;
        t.rows.clear();
        assert!(plot_episode(&t).is_err());
    }

    #[test]
    fn sac_needs_a_checkpoint() {
        let e = run_episode("free_space", Method::SfwSac, 1, None, &LoopConfig::default(), &PlannerWeights::default());
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn suite_rows_are_ordered_and_failures_recorded() {
        let cfg = SuiteConfig {
            scenarios: vec!["free_space".into(), "no_such_place".into()],
            methods: vec![Method::Sfw, Method::Dwa],
            n_seeds: 2,
            ..Default::default()
        };
        let rep = run_suite(&cfg, &LoopConfig::default(), false).unwrap();
        let keys: Vec<(String, Method, u64)> = rep
            .episodes
            .iter()
            .map(|e| (e.record.scenario.clone(), e.record.method, e.record.seed))
            .collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[0], ("free_space".into(), Method::Dwa, 1));
        assert_eq!(keys[3], ("free_space".into(), Method::Sfw, 2));
        assert!(rep.episodes[..4].iter().all(|e| e.error.is_none() && e.record.success));
        assert!(rep.episodes[4..].iter().all(|e| e.error.is_some() && !e.record.success));
        let dir = tempfile::tempdir().unwrap();
        write_report(&rep, dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), EPISODE_HEADER);
        assert!(dir.path().join("errors.txt").exists());
    }
}
