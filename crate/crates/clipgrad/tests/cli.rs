//! End-to-end checks of the binary: exit-code contract, file outputs,
//! reproducibility across worker counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clipgrad"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn run_emits_csv_bands_svg_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(config("quad_fig1.cfg"))
        .args(["--set", "steps=100", "--seeds", "6", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    run_ok(&out);
    let ensemble = std::fs::read_to_string(dir.path().join("quad_fig1_ensemble.csv")).unwrap();
    let mut lines = ensemble.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,step,x,suboptimality,sq_dist,grad_norm_sq,b"
    );
    // 6 seeds x 101 records
    assert_eq!(lines.count(), 6 * 101);
    for line in ensemble.lines().skip(1).take(5) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 7);
        fields[2].parse::<f64>().unwrap();
    }
    let bands = std::fs::read_to_string(dir.path().join("quad_fig1_bands.csv")).unwrap();
    assert!(bands.starts_with("step,prob,value\n"));
    let svg = std::fs::read_to_string(dir.path().join("quad_fig1_bands.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    let summary = std::fs::read_to_string(dir.path().join("quad_fig1_summary.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(json["name"], "quad_fig1");
}

#[test]
fn outputs_are_byte_identical_across_worker_counts() {
    let render = |jobs: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = bin()
            .args(["run", "--config"])
            .arg(config("quad_fig1_clip.cfg"))
            .args(["--set", "steps=200", "--seeds", "12", "--jobs", jobs, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        run_ok(&out);
        std::fs::read(dir.path().join("quad_fig1_clip_ensemble.csv")).unwrap()
    };
    assert_eq!(render("1"), render("4"));
}

#[test]
fn compare_writes_aligned_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["compare", "--config"])
        .arg(config("quad_fig1.cfg"))
        .arg("--config")
        .arg(config("quad_fig1_clip.cfg"))
        .args(["--set", "steps=100", "--seeds", "6", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    run_ok(&out);
    let report = std::fs::read_to_string(dir.path().join("compare.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["methods"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(config("quad_fig1.cfg"))
        .args(["--set", "stepz=100", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));
}

#[test]
fn missing_config_file_exits_2() {
    let out = bin()
        .args(["run", "--config", "/nonexistent.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_verification_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // replay set whose activation frequency falls outside the 99% CI: the
    // frequency check fails and the process exits 1 (still writing the report)
    let out = bin()
        .args(["verify-failure", "--kind", "adagrad", "--config"])
        .arg(config("adv_adagrad.cfg"))
        .args(["--set", "base_seed=92", "--replays", "100", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(1),
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("verify_failure_adagrad.json").exists());
}

#[test]
fn verify_failure_passes_on_shipped_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify-failure", "--kind", "adagradd", "--config"])
        .arg(config("adv.cfg"))
        .args(["--replays", "2000", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    run_ok(&out);
    let report = std::fs::read_to_string(dir.path().join("verify_failure_adagradd.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["pass"], true);
}

#[test]
fn noise_hist_emits_histogram_and_tail_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["noise-hist", "--noise", "pareto_symmetric", "--n", "20000", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    run_ok(&out);
    let hist = std::fs::read_to_string(dir.path().join("noise_hist.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,count\n"));
    let total: u64 = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 20000);
    let tail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("noise_tail.json")).unwrap())
            .unwrap();
    assert!(tail["rho_mild"].as_f64().unwrap() > 5.0);
}

#[test]
fn out_env_var_sets_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["noise-hist", "--n", "1000"])
        .env("CLIPGRAD_OUT", dir.path())
        .output()
        .unwrap();
    run_ok(&out);
    assert!(dir.path().join("noise_hist.csv").exists());
}

#[test]
fn bad_usage_exits_2() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
