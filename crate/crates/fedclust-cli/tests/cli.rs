//! End-to-end tests of the `fedclust` binary: exit codes, report output,
//! dataset generation, and threshold tuning.

use std::path::Path;
use std::process::{Command, Output};

fn fedclust(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedclust"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

/// A fast two-cluster config that exercises every algorithm.
const SMALL_CONFIG: &str = r#"{
  "dataset": {"kind": "synthetic", "m": 6, "n": 40, "d": 8, "c": 2,
              "sigma": 0.0, "train_fraction": 0.8, "seed": 0},
  "train": {"steps": 80, "learning_rate": 0.3},
  "seeds": [1],
  "algorithms": ["local", "global"]
}"#;

#[test]
fn run_emits_a_json_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_CONFIG);
    let out = fedclust(&["run", "--config", &cfg], dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid JSON");
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    for cell in cells {
        assert_eq!(cell["seed"], 1);
        assert!(cell["error"].is_null(), "cell failed: {cell}");
        assert!(cell["mean_test_loss"].as_f64().unwrap().is_finite());
    }
    assert!(report["summary"]["local"]["mean_test_loss"]["mean"].is_number());
}

#[test]
fn identical_runs_produce_identical_reports_modulo_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_CONFIG);
    let strip = |bytes: &[u8]| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    let a = fedclust(&["run", "--config", &cfg], dir.path());
    let b = fedclust(&["run", "--config", &cfg], dir.path());
    assert!(a.status.success() && b.status.success());
    let (a, b) = (strip(&a.stdout), strip(&b.stdout));
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap(),
        "reports must be byte-identical once timings are removed"
    );
}

#[test]
fn seed_algo_format_and_out_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_CONFIG);
    let out_dir = dir.path().join("results");
    let out = fedclust(
        &[
            "run",
            "--config",
            &cfg,
            "--seed",
            "9",
            "--algo",
            "local",
            "--format",
            "csv",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,algo,mean_test_loss,accuracy,misclustering,cluster_count,lambda,error"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("9,local,"), "row: {row}");
    // Exactly one cell: the next line is the blank summary separator.
    assert_eq!(lines.next().unwrap(), "");
    let written = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(written, stdout, "the saved report mirrors stdout");
}

#[test]
fn failing_cells_exit_two_but_still_report() {
    let dir = tempfile::tempdir().unwrap();
    // min_cluster_size larger than m makes the srfca cell fail; local
    // still succeeds.
    let body = r#"{
      "dataset": {"kind": "synthetic", "m": 4, "n": 30, "d": 5, "c": 2,
                  "sigma": 0.0, "train_fraction": 0.8, "seed": 0},
      "train": {"steps": 30, "learning_rate": 0.3},
      "srfca": {"min_cluster_size": 50},
      "seeds": [1],
      "algorithms": ["srfca", "local"]
    }"#;
    let cfg = write_config(dir.path(), "cfg.json", body);
    let out = fedclust(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cells = report["cells"].as_array().unwrap();
    let srfca = cells.iter().find(|c| c["algo"] == "srfca").unwrap();
    let local = cells.iter().find(|c| c["algo"] == "local").unwrap();
    assert!(srfca["error"].is_string());
    assert!(local["error"].is_null());
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Missing config file.
    let out = fedclust(&["run", "--config", "nope.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    // Config that parses but fails validation.
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{
          "dataset": {"kind": "synthetic", "m": 4, "n": 30, "d": 5, "c": 2,
                      "sigma": 0.0, "train_fraction": 0.8, "seed": 0},
          "train": {"steps": 30, "learning_rate": "fast"},
          "seeds": [1]
        }"#,
    );
    let out = fedclust(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // Unknown algorithm flag.
    let cfg = write_config(dir.path(), "ok.json", SMALL_CONFIG);
    let out = fedclust(&["run", "--config", &cfg, "--algo", "kmeans"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // Unknown format.
    let out = fedclust(&["run", "--config", &cfg, "--format", "xml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    // Unknown subcommand (clap usage error).
    let out = fedclust(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let help = fedclust(&["--help"], dir.path());
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    assert!(text.contains("run") && text.contains("gen") && text.contains("tune"));
    let version = fedclust(&["--version"], dir.path());
    assert!(version.status.success());
}

#[test]
fn gen_writes_a_loadable_federation_that_run_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let out = fedclust(
        &[
            "gen",
            "--synthetic",
            "m=6,n=40,d=8,c=2,sigma=0.0,seed=5",
            "--out",
            data_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(data_dir.join("meta.json").exists());
    assert!(data_dir.join("client_0.csv").exists());
    assert!(data_dir.join("ground_truth.csv").exists());

    // Point a run config at the generated directory.
    let body = format!(
        r#"{{
          "dataset": {{"kind": "path", "path": {}}},
          "train": {{"steps": 60, "learning_rate": 0.3}},
          "seeds": [1],
          "algorithms": ["local"]
        }}"#,
        serde_json::to_string(data_dir.to_str().unwrap()).unwrap()
    );
    let cfg = write_config(dir.path(), "from_disk.json", &body);
    let out = fedclust(&["run", "--config", &cfg], dir.path());
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["cells"][0]["mean_test_loss"]
        .as_f64()
        .unwrap()
        .is_finite());
}

#[test]
fn gen_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        "m=5,n=40,d=8,c=2,sigma=0.0", // m not divisible by c
        "m=4,n=40,d=8,c=2",           // missing sigma
        "m=4,n=40,d=8,c=2,sigma=0.0,mystery=1",
        "m=four,n=40,d=8,c=2,sigma=0.0",
    ] {
        let out = fedclust(&["gen", "--synthetic", bad, "--out", "x"], dir.path());
        assert_eq!(out.status.code(), Some(1), "spec {bad:?} should fail");
    }
}

#[test]
fn tune_prints_the_sweep_and_the_winner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_CONFIG);
    let out = fedclust(
        &["tune", "--config", &cfg, "--lambda-grid", "0.5:8:4"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "lambda,objective,cluster_count");
    assert_eq!(lines.len(), 6, "4 grid points + header + winner: {stdout}");
    let best = lines[5]
        .strip_prefix("best_lambda,")
        .expect("winner line")
        .parse::<f64>()
        .unwrap();
    assert!((0.5..=8.0).contains(&best));
}

#[test]
fn tune_rejects_malformed_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_CONFIG);
    for bad in ["5", "1:2", "2:1:5", "0:1:3:log", "1:2:0", "a:b:c"] {
        let out = fedclust(&["tune", "--config", &cfg, "--lambda-grid", bad], dir.path());
        assert_eq!(out.status.code(), Some(1), "grid {bad:?} should fail");
    }
}
