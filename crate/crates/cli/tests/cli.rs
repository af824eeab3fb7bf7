//! End-to-end checks of the `nashnet` binary: exit codes, CSV emission and
//! determinism, and config parsing failures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}"))
}

fn nashnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nashnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_passes_on_both_fixtures() {
    for fixture in ["osnr-six-player.toml", "linear-nonmonotone.toml"] {
        let out = nashnet(&["check", "--config", fixture_path(fixture).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "fixture {fixture}");
        assert!(stdout_of(&out).contains("result: PASS"));
    }
}

#[test]
fn check_exits_one_on_violated_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gamma-one.toml");
    let text = std::fs::read_to_string(fixture_path("osnr-six-player.toml"))
        .unwrap()
        .replace("gamma = 0.2", "gamma = 1.0");
    std::fs::write(&path, text).unwrap();
    let out = nashnet(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("result: FAIL"));
}

#[test]
fn malformed_config_reports_location_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[game]\nkind = \"osnr\"\neta = not-a-list\n").unwrap();
    let out = nashnet(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error"), "stderr: {err}");
    assert!(err.contains("line 3"), "stderr should carry the location: {err}");
}

#[test]
fn run_writes_byte_identical_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg = fixture_path("osnr-six-player.toml");
    for out_dir in [&out_a, &out_b] {
        let out = nashnet(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(stdout_of(&out).contains("terminated=tolerance"));
    }
    let a = std::fs::read(out_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectory.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn run_respects_gamma_and_steps_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashnet(&[
        "run",
        "--config",
        fixture_path("osnr-six-player.toml").to_str().unwrap(),
        "--gamma",
        "0",
        "--steps",
        "0.0006",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("terminated=tolerance"), "stdout: {text}");
    // The plain fixed-step baseline needs far more iterations.
    let iters: u64 = text
        .split("iters=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap();
    assert!(iters > 2_000, "baseline finished too quickly: {iters}");
}

#[test]
fn run_rejects_inadmissible_steps_without_force() {
    let cfg = fixture_path("osnr-six-player.toml");
    let out = nashnet(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // --force runs anyway; the iteration may then diverge or stall, but the
    // flag itself must be honored (exit code 0 or 2, never 1).
    let dir = tempfile::tempdir().unwrap();
    let out = nashnet(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--steps",
        "0.09",
        "--force",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(1));
}

#[test]
fn oracle_prints_equilibrium_and_residual() {
    let out = nashnet(&[
        "oracle",
        "--config",
        fixture_path("linear-nonmonotone.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("equilibrium: [0.000000, 0.000000]"), "stdout: {text}");
    assert!(text.contains("interior: yes"));
}

#[test]
fn montecarlo_writes_consistent_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = nashnet(&[
        "montecarlo",
        "--n",
        "4",
        "--gammas",
        "0.2,0.5",
        "--instances",
        "3",
        "--seed",
        "9",
        "--jobs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let instances = std::fs::read_to_string(dir.path().join("montecarlo_instances.csv")).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("montecarlo_summary.csv")).unwrap();
    // 3 instances x 2 gammas plus header.
    assert_eq!(instances.lines().count(), 7);
    assert_eq!(summary.lines().count(), 3);
    assert!(instances.starts_with(
        "instance,seed,gamma,iterations,terminated_by,action_error,consensus_residual,wall_time_s"
    ));
    assert!(summary.starts_with(
        "gamma,completed,failures,mean_action_error,stddev_action_error,mean_iterations,mean_wall_time_s,checksum"
    ));

    // Rows are deterministic in the seeds (wall time excluded): rerunning
    // sequentially gives the same deterministic columns.
    let dir2 = tempfile::tempdir().unwrap();
    let out2 = nashnet(&[
        "montecarlo",
        "--n",
        "4",
        "--gammas",
        "0.2,0.5",
        "--instances",
        "3",
        "--seed",
        "9",
        "--jobs",
        "1",
        "--out",
        dir2.path().to_str().unwrap(),
    ]);
    assert_eq!(out2.status.code(), Some(0));
    let instances2 =
        std::fs::read_to_string(dir2.path().join("montecarlo_instances.csv")).unwrap();
    let strip_wall = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
            .collect()
    };
    assert_eq!(strip_wall(&instances), strip_wall(&instances2));
}

#[test]
fn check_reports_the_nonmonotone_diagnostic() {
    let out = nashnet(&[
        "check",
        "--config",
        fixture_path("linear-nonmonotone.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("-1.189"), "stdout: {text}");
    assert!(text.contains("not monotone"));
}

#[test]
fn oracle_exits_two_when_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no-oracle.toml");
    // Singular, non-dominant gradient matrix: no oracle exists.
    std::fs::write(
        &path,
        r#"
[game]
kind = "linear"
matrix = [[1.0, 1.0], [1.0, 1.0]]
offset = [-10.0, 3.0]
boxes = [[0.0, 1.0], [0.0, 1.0]]

[algorithm]
gamma = 0.5
steps = [0.5, 0.5]
"#,
    )
    .unwrap();
    let out = nashnet(&["oracle", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explicit_edge_lists_build_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("edges.toml");
    std::fs::write(
        &path,
        r#"
[game]
kind = "linear"
matrix = [[2.0, 0.5, 0.5], [0.5, 2.0, 0.5], [0.5, 0.5, 2.0]]
offset = [-1.0, -1.0, -1.0]
boxes = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]

[graph]
edges = [[0, 1], [1, 2], [2, 0]]

[algorithm]
gamma = 0.3
steps = "theorem1"
"#,
    )
    .unwrap();
    let out = nashnet(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_of(&out);
    assert!(text.contains("3 nodes, 6 edges"));

    let run_dir = dir.path().join("run");
    let out = nashnet(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(run_dir.join("trajectory.csv").exists());
    assert!(run_dir.join("weights.csv").exists());
}

#[test]
fn random_instance_configs_supply_their_own_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("random.toml");
    std::fs::write(
        &path,
        r#"
[game]
kind = "random-osnr"
channels = 4
seed = 3

[algorithm]
gamma = 0.2
steps = "theorem1"
"#,
    )
    .unwrap();
    let out = nashnet(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("result: PASS"));
}

#[test]
fn montecarlo_rejects_bad_gamma_lists() {
    let out = nashnet(&[
        "montecarlo",
        "--n",
        "4",
        "--gammas",
        "0.2,1.0",
        "--instances",
        "2",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fixture_matches_builtin_reference_instance() {
    use nashnet_cli::config::{build_game, ExperimentConfig, GameInstance};

    let cfg = ExperimentConfig::from_path(&fixture_path("osnr-six-player.toml")).unwrap();
    let (game, _) = build_game(&cfg.game).unwrap();
    let built_in = nashnet::games::OsnrGame::six_player();
    match game {
        GameInstance::Osnr(g) => assert_eq!(g, built_in),
        _ => panic!("fixture should resolve to the power-control game"),
    }
}
