use std::path::Path;
use std::process::{Command, Output};

fn snakelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snakelab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

/// Default robot with one-period episodes, small enough for a quick end-to-end run.
fn toy_config(dir: &Path) -> String {
    let out = snakelab(dir, &["default-config"]);
    assert!(out.status.success());
    let mut text = String::from_utf8(out.stdout).unwrap();
    text = text.replace("periods_per_episode = 10", "periods_per_episode = 1");
    text = text.replace("episodes = 200", "episodes = 2");
    text = text.replace("settle_periods = 50", "settle_periods = 30");
    let path = dir.join("toy.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn default_config_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = snakelab(dir.path(), &["--config", &cfg, "--periods", "1", "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,"));
    // Initial state plus one period at dt = 0.02.
    assert_eq!(traj.lines().count(), 1 + 1 + 314);
}

#[test]
fn learn_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let out = snakelab(dir.path(), &["--config", &cfg, "learn"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "weights.csv", "sensor_weights.csv", "observations.csv", "gains.csv", "tracking.csv", "particles.csv", "config.toml"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("episode,avg_bellman_error,net_dpsi,mean_cost"));
    assert_eq!(metrics.lines().count(), 3);

    let out = snakelab(dir.path(), &["--config", &cfg, "--periods", "1", "evaluate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("evaluation_summary.csv")).unwrap();
    assert!(summary.starts_with("periods,net_dpsi"));
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("dt = 0.02", "dt = -1.0");
    std::fs::write(&cfg, text).unwrap();
    let out = snakelab(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = snakelab(dir.path(), &["--config", "/nonexistent/config.toml", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("settle_periods = 30", "settle_periods = 1");
    std::fs::write(&cfg, text).unwrap();
    let out = snakelab(dir.path(), &["--config", &cfg, "limit-cycle"]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = toy_config(dir.path());
    let mut weights = String::new();
    for i in 0..16 {
        weights.push_str(&format!("w1,{i},0\n"));
    }
    for i in 0..32 {
        weights.push_str(&format!("w2,{i},0\n"));
    }
    for i in 0..5 {
        weights.push_str(&format!("w3,{i},{}\n", if i == 2 { -1.0 } else { 0.1 }));
    }
    let path = dir.path().join("bad_weights.csv");
    std::fs::write(&path, weights).unwrap();
    let out = snakelab(dir.path(), &["--config", &cfg, "evaluate", "--weights", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
