//! End-to-end checks of the `nsk` binary: exit codes, emitted files, and the
//! config echo round-trip.

use nsk_core::config::RunConfig;
use std::path::Path;
use std::process::Command;

fn nsk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsk"))
}

/// Short, fast experiment used by most of these tests.
fn short_run_args(out: &Path) -> Vec<String> {
    vec![
        "--set".into(),
        "grid.n=64".into(),
        "--set".into(),
        "time.t_end=0.5".into(),
        "--set".into(),
        "time.output_interval=0.02".into(),
        "--set".into(),
        "time.fit_start=0.1".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

#[test]
fn simulate_writes_outputs_and_prints_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .arg("simulate")
        .args(short_run_args(tmp.path()))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("decay: C="), "stdout: {stdout}");
    assert!(stdout.contains("monotone=true"), "stdout: {stdout}");
    assert!(tmp.path().join("series.csv").exists());
    assert!(tmp.path().join("run.json").exists());

    let csv = std::fs::read_to_string(tmp.path().join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        nsk_core::entropy::EntropyReport::CSV_HEADER
    );
    assert!(lines.count() >= 20);
}

#[test]
fn run_json_echoed_config_reparses_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let status = nsk()
        .arg("simulate")
        .args(short_run_args(tmp.path()))
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(tmp.path().join("run.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let echoed: RunConfig = serde_json::from_value(json["config"].clone()).unwrap();

    let expected = RunConfig::from_toml_with_overrides(
        "",
        &[
            "grid.n=64".into(),
            "time.t_end=0.5".into(),
            "time.output_interval=0.02".into(),
            "time.fit_start=0.1".into(),
        ],
    )
    .unwrap();
    assert_eq!(echoed, expected);
}

#[test]
fn inadmissible_pair_is_refused_with_exit_2_unless_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = short_run_args(tmp.path());
    args.extend([
        "--set".into(),
        "viscosity.family=power-law".into(),
        "--set".into(),
        "viscosity.alpha=2.0".into(),
        "--set".into(),
        "pressure.gamma=3.0".into(),
        "--set".into(),
        "time.t_end=0.05".into(),
    ]);
    let out = nsk().arg("simulate").args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissib"));

    let out = nsk()
        .arg("simulate")
        .args(&args)
        .arg("--override-admissibility")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_duration_and_unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .arg("simulate")
        .args(["--set", "time.t_end=0", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = nsk()
        .arg("simulate")
        .args(["--set", "grid.bogus=1", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_read_and_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.toml");
    std::fs::write(
        &cfg_path,
        "[grid]\nn = 64\n[time]\nt_end = 0.3\noutput_interval = 0.02\nfit_start = 0.1\n",
    )
    .unwrap();
    let out = nsk()
        .arg("simulate")
        .arg("--config")
        .arg(&cfg_path)
        .args(["--set", "entropy.r3=2.0"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("run.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["config"]["entropy"]["r3"], serde_json::json!(2.0));
    assert_eq!(json["config"]["grid"]["n"], serde_json::json!(64));
}

#[test]
fn missing_config_file_exits_2() {
    let out = nsk()
        .arg("simulate")
        .args(["--config", "/nonexistent/path.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vacuum_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .arg("simulate")
        .args([
            "--set",
            "grid.n=64",
            "--set",
            "time.t_end=0.5",
            // floor above the initial minimum density: trips immediately
            "--set",
            "solver.rho_floor_rel=0.9",
            "--out",
        ])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_single_lemma_is_deterministic_and_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "verify",
        "--lemma",
        "poincare",
        "--delta",
        "0.25",
        "--seed",
        "7",
        "--profiles",
        "30",
        "--set",
        "grid.n=128",
    ];
    let out1 = nsk().args(args).arg("--out").arg(tmp.path().join("v1")).output().unwrap();
    assert_eq!(out1.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out1.stderr));
    let out2 = nsk().args(args).arg("--out").arg(tmp.path().join("v2")).output().unwrap();
    assert_eq!(out2.status.code(), Some(0));

    let a = std::fs::read(tmp.path().join("v1/verify.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("v2/verify.csv")).unwrap();
    assert_eq!(a, b);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("v1/verify-summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["all_ok"], serde_json::json!(true));
    assert_eq!(summary["lemmas"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_all_reports_four_lemmas() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .args([
            "verify",
            "--lemma",
            "all",
            "--profiles",
            "40",
            "--set",
            "grid.n=128",
            "--no-refinement-check",
        ])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verify-summary.json")).unwrap())
            .unwrap();
    // poincare expands to its three delta levels, plus the other three lemmas
    assert_eq!(summary["lemmas"].as_array().unwrap().len(), 6);
    let names: Vec<&str> = summary["lemmas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["lemma"].as_str().unwrap())
        .collect();
    for want in ["poincare", "lower-bound", "modulated", "jensen"] {
        assert!(names.contains(&want), "{names:?}");
    }
}

#[test]
fn verify_rejects_unknown_lemma() {
    let out = nsk().args(["verify", "--lemma", "mystery"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_runs_grid_and_marks_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .arg("sweep")
        .args([
            "--set",
            "grid.n=64",
            "--set",
            "time.t_end=0.3",
            "--set",
            "time.output_interval=0.02",
            "--set",
            "time.fit_start=0.1",
            "--vary",
            "entropy.r3=0.5,1,2",
        ])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(tmp.path().join("sweep-summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "index,entropy.r3,c,r_squared,monotone,status");
    assert_eq!(lines.len(), 4);
    for i in 0..3 {
        assert!(tmp.path().join(format!("run-{i:03}/series.csv")).exists());
        assert!(lines[i + 1].ends_with(",ok"), "{}", lines[i + 1]);
    }
}

#[test]
fn sweep_refuses_empty_and_oversized_grids() {
    let out = nsk().arg("sweep").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let values: Vec<String> = (0..65).map(|i| i.to_string()).collect();
    let out = nsk()
        .arg("sweep")
        .args(["--vary", &format!("entropy.r3={}", values.join(","))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn env_var_sets_the_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nsk()
        .arg("simulate")
        .args([
            "--set",
            "grid.n=64",
            "--set",
            "time.t_end=0.2",
            "--set",
            "time.output_interval=0.02",
            "--set",
            "time.fit_start=0.05",
        ])
        .env("NSK_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("series.csv").exists());
}

#[test]
fn check_law_reports_admissibility() {
    let out = nsk().arg("check-law").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(json["admissible"], serde_json::json!(true));
    assert_eq!(json["report"]["gamma_condition"], serde_json::json!("SmallAlphaOk"));

    let out = nsk()
        .args([
            "check-law",
            "--set",
            "viscosity.family=power-law",
            "--set",
            "viscosity.alpha=2.0",
            "--set",
            "pressure.gamma=3.0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(json["admissible"], serde_json::json!(false));
}
