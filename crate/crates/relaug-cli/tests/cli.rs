//! End-to-end checks of the binary: stage chaining, exit codes, output
//! files. Everything runs on a small generated dataset.

use std::path::Path;
use std::process::{Command, Output};

fn relaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaug"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path) -> String {
    let config = serde_json::json!({
        "dataset": dir.join("data"),
        "out": dir.join("out"),
        "seed": 3,
        "encoder_dims": {"d_num": 4, "d_cat": 4, "d_text": 4, "d_out": 6},
        "stage1": {"d_h": 8, "epochs": 3, "batch_size": 16},
        "similarity": {"mode": "top_k", "k": 3},
        "stage2": {"d_model": 8, "layers": 2, "epochs": 4}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.display().to_string()
}

fn write_synth_spec(dir: &Path) -> String {
    let spec = serde_json::json!({
        "aux_tables": 2,
        "base_rows": 80,
        "aux_rows": 20,
        "label_noise": 0.0,
        "seed": 5
    });
    let path = dir.join("synth.json");
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn stages_chain_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path());
    let data_out = dir.path().join("data").display().to_string();
    assert_ok(
        &relaug(&["synth", "--spec", &spec, "--data-out", &data_out]),
        "synth",
    );
    assert!(dir.path().join("data/schema.json").exists());

    let config = write_config(dir.path());
    for stage in [
        "ingest",
        "plan",
        "link",
        "train-stage1",
        "split",
        "build-graph",
        "train-stage2",
        "predict",
    ] {
        assert_ok(&relaug(&[stage, "--config", &config]), stage);
    }
    let eval = relaug(&["evaluate", "--config", &config]);
    assert_ok(&eval, "evaluate");
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("\"accuracy\""), "metrics on stdout: {stdout}");

    let out = dir.path().join("out");
    for artifact in [
        "load_report.json",
        "meta_paths.json",
        "coreset.json",
        "subtables.json",
        "graph.json",
        "stage2.json",
        "predictions.csv",
        "metrics.json",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    assert_ok(&relaug(&["run-all", "--config", &config]), "run-all");
    assert!(out.join("run_manifest.json").exists());
}

#[test]
fn missing_artifact_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path());
    let data_out = dir.path().join("data").display().to_string();
    assert_ok(
        &relaug(&["synth", "--spec", &spec, "--data-out", &data_out]),
        "synth",
    );
    let config = write_config(dir.path());
    let out = relaug(&["evaluate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2), "evaluate without a graph");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("build-graph"), "names the stage: {stderr}");
}

#[test]
fn bad_config_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"dataset": "x", "out": "y", "elll": 0.5}"#).unwrap();
    let out = relaug(&["ingest", "--config", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(3), "unknown config key");

    let out = relaug(&["ingest"]);
    assert_eq!(out.status.code(), Some(3), "missing --config");
}

#[test]
fn overrides_reach_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path());
    let data_out = dir.path().join("data").display().to_string();
    assert_ok(
        &relaug(&["synth", "--spec", &spec, "--data-out", &data_out]),
        "synth",
    );
    let config = write_config(dir.path());
    let other_out = dir.path().join("other").display().to_string();
    assert_ok(
        &relaug(&["run-all", "--config", &config, "--out", &other_out, "--seed", "9"]),
        "run-all with overrides",
    );
    let manifest = std::fs::read_to_string(dir.path().join("other/run_manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"), "seed override recorded");
}

#[test]
fn ablate_writes_grid_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_synth_spec(dir.path());
    let data_out = dir.path().join("data").display().to_string();
    assert_ok(
        &relaug(&["synth", "--spec", &spec, "--data-out", &data_out]),
        "synth",
    );
    let config = write_config(dir.path());
    let out = relaug(&[
        "ablate",
        "--config",
        &config,
        "--seeds",
        "1",
        "--baselines",
        "--random-k",
        "3",
        "--sweep",
        "0.5,1.0",
    ]);
    assert_ok(&out, "ablate");
    let outdir = dir.path().join("out");
    let runs = std::fs::read_to_string(outdir.join("ablation_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 13, "12 grid runs + header");
    assert!(outdir.join("ablation_summary.txt").exists());
    assert!(outdir.join("ablation.json").exists());
    assert!(outdir.join("baselines.json").exists());
    let sweep = std::fs::read_to_string(outdir.join("threshold_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3, "2 sweep points + header");
}
