use std::process::Command;

fn sfw() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sfw"))
}

#[test]
fn scenarios_lists_twelve() {
    let out = sfw().arg("scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().any(|l| l == "static_blocker"));
}

#[test]
fn run_prints_one_metrics_line() {
    let out = sfw()
        .args(["run", "--scenario", "free_space", "--method", "dwa", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("status=success"));
}

#[test]
fn run_writes_trace_that_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = sfw()
        .args(["run", "--scenario", "frontal_passing", "--method", "sfw", "--seed", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let trace = dir.path().join("frontal_passing__sfw__2.csv");
    assert!(trace.exists());
    assert!(dir.path().join("frontal_passing__sfw__2.metrics.csv").exists());
    let svg = dir.path().join("plot.svg");
    let out = sfw().args(["plot", "--trace"]).arg(&trace).arg("--out").arg(&svg).output().unwrap();
    assert!(out.status.success());
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<?xml"));
}

#[test]
fn usage_errors_exit_two() {
    let out = sfw().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = sfw()
        .args(["suite", "--config", "/nonexistent/run.toml", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);
}

#[test]
fn sac_without_checkpoint_fails_with_diagnostic() {
    let out = sfw()
        .args(["run", "--scenario", "free_space", "--method", "sfw-sac"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("checkpoint"));
}

#[test]
fn suite_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[suite]\nscenarios = [\"free_space\"]\nmethods = [\"dwa\", \"sfw\"]\nn_seeds = 2\ntraces = true\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = sfw().args(["suite", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(out_dir.join("aggregates.csv").exists());
    assert_eq!(std::fs::read_dir(out_dir.join("traces")).unwrap().count(), 8);
}

#[test]
fn train_then_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[train]\nepisodes = 2\ncheckpoint_every = 1\nwarmup_steps = 10\nscenarios = [\"free_space\"]\n[train.sac]\nhidden = 16\nbatch_size = 8\n",
    )
    .unwrap();
    let out_dir = dir.path().join("train");
    let out = sfw().args(["train", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(out_dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let ckpt = out_dir.join("checkpoints/episode_00002.ckpt");
    let out = sfw()
        .args(["run", "--scenario", "free_space", "--method", "sfw-sac", "--checkpoint"])
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = sfw()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--resume")
        .arg(out_dir.join("checkpoints/episode_00001.ckpt"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(out_dir.join("train_log.csv")).unwrap(), log);
}
