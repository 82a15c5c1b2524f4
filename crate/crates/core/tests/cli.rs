//! End-to-end checks of the command line interface: exit codes, artifact
//! layout, analyze round trips, and bit-reproducibility across thread
//! counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_polydiff")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polydiff-cli-{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_config(out: &Path) -> String {
    format!(
        r#"{{
  "family": {{"family": "haar", "alpha": 1.0, "theta": 0.5, "l_max": 3}},
  "solver": {{"mode": "taylor", "n_target": 40, "bulk": 0.2}},
  "output_dir": {out:?}
}}"#
    )
}

#[test]
fn run_produces_artifacts_and_exit_zero() {
    let dir = temp_dir("run");
    let config_path = dir.join("config.json");
    fs::write(&config_path, small_config(&dir.join("out"))).unwrap();

    let status = Command::new(binary())
        .args(["run", config_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    for artifact in [
        "taylor_coefficients.csv",
        "rearrangement.csv",
        "rates.csv",
        "diagnostics.json",
        "manifest.json",
    ] {
        assert!(dir.join("out").join(artifact).exists(), "{artifact}");
    }

    // manifest carries enough to re-run
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["member_count"], 40);
    assert!(manifest["config_hash"].is_string());
    assert!(manifest["dof_count"].as_u64().unwrap() > 0);

    // analyze consumes the dump
    let status = Command::new(binary())
        .args([
            "analyze",
            dir.join("out/taylor_coefficients.csv").to_str().unwrap(),
            "--out",
            dir.join("re").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("re/rates.csv").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn validation_failures_exit_with_code_two() {
    let dir = temp_dir("validation");

    // missing config file
    let status = Command::new(binary())
        .args(["run", dir.join("nope.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // malformed parameters
    let config_path = dir.join("bad.json");
    fs::write(
        &config_path,
        r#"{
  "family": {"family": "haar", "alpha": 1.0, "theta": 0.5, "l_max": 3},
  "solver": {"mode": "taylor", "n_target": 40, "bulk": 7.5},
  "output_dir": "/tmp/unused"
}"#,
    )
    .unwrap();
    let output = Command::new(binary())
        .args(["run", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("bulk"));

    // theta outside (0,1) is a config error as well
    fs::write(
        &config_path,
        r#"{
  "family": {"family": "haar", "alpha": 1.0, "theta": 1.5, "l_max": 3},
  "solver": {"mode": "taylor", "n_target": 40},
  "output_dir": "/tmp/unused"
}"#,
    )
    .unwrap();
    let output = Command::new(binary())
        .args(["run", config_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn identical_config_is_bit_identical_across_thread_counts() {
    let dir = temp_dir("determinism");
    for mode in ["legendre", "taylor"] {
        let out_a = dir.join(format!("{mode}-a"));
        let out_b = dir.join(format!("{mode}-b"));
        for (out, threads) in [(&out_a, "1"), (&out_b, "4")] {
            let config_path = dir.join(format!("config-{mode}-{threads}.json"));
            fs::write(
                &config_path,
                format!(
                    r#"{{
  "family": {{"family": "inclusions", "beta": 1.0, "theta": 0.5, "j": 16}},
  "solver": {{"mode": "{mode}", "n_target": 64}},
  "mesh": {{"elements": 64}},
  "output_dir": {out:?}
}}"#
                ),
            )
            .unwrap();
            let status = Command::new(binary())
                .args(["run", config_path.to_str().unwrap()])
                .env("RAYON_NUM_THREADS", threads)
                .status()
                .unwrap();
            assert!(status.success());
        }
        for artifact in [
            &format!("{mode}_coefficients.csv"),
            "rearrangement.csv",
            "rates.csv",
        ] {
            let a = fs::read(out_a.join(artifact)).unwrap();
            let b = fs::read(out_b.join(artifact)).unwrap();
            assert_eq!(a, b, "{artifact} differs across thread counts");
        }
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn oracle_check_passes() {
    let output = Command::new(binary()).arg("oracle-check").output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "stdout: {stdout}");
    assert!(stdout.contains("verdict: PASS"));
}
