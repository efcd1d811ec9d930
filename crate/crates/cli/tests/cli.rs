use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jdr_cli::{run_to_dir, ExperimentConfig};

fn jdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jdr"))
        .args(args)
        .env("JDR_THREADS", "1")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SWEEP: &str = "\
experiment = csbm_sweep
id = sweep
seed = 11
n_seeds = 5
csbm.n = 240
csbm.f = 96
csbm.phi = -0.75, 0, 0.75
jdr.replay_table5 = true
jdr.max_K = 3
eval.metrics = alignment_before, alignment_after, sc_accuracy
";

#[test]
fn sweep_writes_one_row_per_phi_seed_and_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(SWEEP).unwrap();
    run_to_dir(&cfg, tmp.path()).unwrap();
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "experiment,seed,condition,metric,value,wall_ms");
    assert_eq!(lines.len() - 1, 3 * 5 * 3);
    assert!(lines[1].starts_with("sweep[phi=-0.75],11,none,alignment_before,"));
    assert!(lines[2].starts_with("sweep[phi=-0.75],11,jdr,alignment_after,"));
    assert!(lines[45].starts_with("sweep[phi=0.75],15,jdr,sc_accuracy,"));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let groups = summary["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 9);
    for g in groups {
        assert_eq!(g["n"], 5);
        let (lo, m, hi) = (
            g["ci_low"].as_f64().unwrap(),
            g["mean"].as_f64().unwrap(),
            g["ci_high"].as_f64().unwrap(),
        );
        assert!(lo <= m && m <= hi, "{g}");
    }
    assert_eq!(summary["bootstrap_resamples"], 1000);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write(tmp.path(), "sweep.cfg", SWEEP);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(jdr(&["run", &cfg_path, "--out", a.to_str().unwrap(), "--seeds", "2"])
        .status
        .success());
    let out = jdr(&[
        "run",
        &cfg_path,
        "--out",
        b.to_str().unwrap(),
        "--seeds",
        "2",
        "--threads",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn prop1_summary_has_the_improvement_fraction() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(
        "experiment = prop1\nprop1.n = 300\nprop1.f = 120\nprop1.lambda = 1.5\nprop1.mu = 2.0\nprop1.eta = 0.05\nprop1.trials = 4\n",
    )
    .unwrap();
    run_to_dir(&cfg, tmp.path()).unwrap();
    let s = fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    let metrics: Vec<&str> = v["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["metric"].as_str().unwrap())
        .collect();
    assert_eq!(metrics.iter().filter(|m| **m == "fraction_improved").count(), 2);
    assert!(metrics.contains(&"mean_overlap_before") && metrics.contains(&"mean_overlap_after"));
}

#[test]
fn ridge_sweep_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(
        "experiment = ridge_sweep\nridge.n = 120\nridge.lambda = 1\nridge.mu = 1\nridge.trials = 2\nridge.grid = 0, 0.1, 1\n",
    )
    .unwrap();
    let out = run_to_dir(&cfg, tmp.path()).unwrap();
    assert_eq!(out.records.len(), 2 * 3);
    assert_eq!(out.records[0].metric, "mse_eta=0");
    assert_eq!(out.records[0].condition.label(), "none");
}

#[test]
fn missing_rate_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.cfg",
        "experiment = real_dataset\ndataset.path = nowhere\njdr.K = 2\njdr.L_A = 1\njdr.L_X = 1\njdr.eta_X1 = 0.1\njdr.eta_X2 = 0\n",
    );
    let out = jdr(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("jdr.eta_A"));
    assert_eq!(jdr(&["run"]).status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "missing.cfg",
        "experiment = real_dataset\ndataset.path = /definitely/not/here\njdr.K = 1\njdr.L_A = 1\njdr.L_X = 1\n\
         jdr.eta_A = 0.1\njdr.eta_X1 = 0.1\njdr.eta_X2 = 0\n",
    );
    assert_eq!(
        jdr(&["run", &cfg, "--out", tmp.path().join("o").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn generate_rewire_and_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = jdr(&[
        "gen-csbm",
        "--phi",
        "-0.5",
        "--n",
        "200",
        "--f",
        "80",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = write(tmp.path(), "rewire.cfg", "jdr.table5_phi = -0.5\njdr.max_K = 2\n");
    let rewired = tmp.path().join("rewired");
    let out = jdr(&[
        "rewire",
        data.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        rewired.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = jdr_core::graph::load_dataset(&rewired).unwrap();
    assert_eq!(d.n_nodes(), 200);
    assert!(d.graph.degrees().iter().all(|&k| k >= 64));

    let out = jdr(&["eval-sc", rewired.to_str().unwrap(), "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let acc = v["accuracy"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&acc));
}
