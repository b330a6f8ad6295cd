//! End-to-end tests of the command-line binary: subcommand wiring, exit
//! codes, artifact layout, and deterministic replay.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use covert_planning::config::{preset, save_json, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covert-planning"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// The mini preset shrunk to a few seconds of work.
fn tiny_config() -> ExperimentConfig {
    let mut config = preset("mini-5x5").unwrap();
    config.hyper.max_outer_iterations = 4;
    config.hyper.batches_m = 2;
    config.hyper.trajectories_per_batch = 15;
    config.hyper.horizon = 12;
    config
}

fn write_config(dir: &Path, config: &ExperimentConfig) -> String {
    let path = dir.join("config.json");
    save_json(&path, config).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn train_writes_artifacts_and_replays_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), &tiny_config());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    for out in [&out_a, &out_b] {
        let output = run(&[
            "train",
            "--config",
            &config_path,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let trace_a = fs::read(out_a.join("trace.csv")).unwrap();
    let trace_b = fs::read(out_b.join("trace.csv")).unwrap();
    assert_eq!(trace_a, trace_b);
    assert!(String::from_utf8(trace_a)
        .unwrap()
        .starts_with("iter,lagrangian,value,detection,kl,lambda,beta\n"));
    assert!(out_a.join("policy.json").exists());

    // A different seed gives a different trace.
    let output = run(&[
        "train",
        "--config",
        &config_path,
        "--seed",
        "99",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let trace_c = fs::read(dir.path().join("c/trace.csv")).unwrap();
    assert_ne!(trace_c, trace_b);
}

#[test]
fn evaluate_and_cross_eval_consume_trained_policies() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), &tiny_config());
    let out = dir.path().join("train");
    assert!(run(&[
        "train",
        "--config",
        &config_path,
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());
    let policy = out.join("policy.json");

    let output = run(&[
        "evaluate",
        "--config",
        &config_path,
        "--policy",
        policy.to_str().unwrap(),
        "--samples",
        "300",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("detection"), "stdout: {stdout}");

    let cross_dir = dir.path().join("cross");
    let output = run(&[
        "cross-eval",
        "--config",
        &config_path,
        "--policy",
        policy.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--betas",
        "0.05,0.1,0.15",
        "--samples",
        "200",
        "--out",
        cross_dir.to_str().unwrap(),
    ]);
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(cross_dir.join("cross_eval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy_beta,eval_beta,detection,detection_se,value,value_se"
    );
    // 2 policies x 3 betas.
    assert_eq!(lines.count(), 6);
}

#[test]
fn invalid_config_exits_with_code_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny_config();
    config.hyper.eta = -0.5;
    let config_path = write_config(dir.path(), &config);
    let output = run(&["train", "--config", &config_path]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("eta"), "stderr: {stderr}");
}

#[test]
fn unknown_suite_and_missing_args_are_validation_errors() {
    let output = run(&["verify", "bogus"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8(output.stderr)
        .unwrap()
        .contains("unknown suite"));

    let output = run(&["train"]);
    assert_eq!(output.status.code(), Some(1));

    let output = run(&["evaluate", "--preset", "nope", "--policy", "x.json"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn verify_theorem1_prints_pass_lines() {
    let output = run(&["verify", "theorem1"]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(stdout.contains("rho = 0.25"));
}
