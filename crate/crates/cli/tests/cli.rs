//! End-to-end tests of the `thinplate` binary: exit codes, file outputs,
//! golden values, determinism, and config strictness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_thinplate");

struct CliRun {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_cli(args: &[&str]) -> CliRun {
    let output = Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn");
    CliRun {
        code: output.status.code().expect("no exit code"),
        stdout: String::from_utf8(output.stdout).expect("stdout utf-8"),
        stderr: String::from_utf8(output.stderr).expect("stderr utf-8"),
    }
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).expect("config written");
    path
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

/// CSV data rows (header stripped), split into fields.
fn csv_rows(body: &str) -> Vec<Vec<String>> {
    body.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const LIMIT_CONFIG: &str = r#"{
  "geometry": {
    "left_len": 1.0,
    "right_len": 1.0,
    "epsilon": 0.1,
    "profile": { "kind": "constant", "value": 1.0 }
  },
  "params": { "sigma": 0.0, "tau": 0.0 },
  "discretization": { "n_elems_1d": 256 },
  "solver": { "k": 2, "tol": 1e-6, "max_iters": 400, "seed": 42 }
}
"#;

#[test]
fn solve_limit_hits_golden_value_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "limit.json", LIMIT_CONFIG);
    let out1 = tmp.path().join("run1");
    let out2 = tmp.path().join("run2");

    for out in [&out1, &out2] {
        let run = run_cli(&[
            "solve-limit",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    }

    // First eigenvalue of the flat-profile limit problem at σ = τ = 0:
    // 1 + β⁴ with β the first clamped-beam root, ≈ 501.5639.
    let csv = read(&out1, "spectrum.csv");
    assert!(csv.starts_with(
        "index,eigenvalue,residual,mass_omega,mass_channel\n"
    ));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    let theta1: f64 = rows[0][1].parse().unwrap();
    let golden = 501.5639;
    assert!(
        ((theta1 - golden) / golden).abs() < 1e-5,
        "first eigenvalue {theta1} is off the golden value {golden}"
    );

    // Identical config and seed ⇒ byte-identical CSV and report bodies.
    assert_eq!(read(&out1, "spectrum.csv"), read(&out2, "spectrum.csv"));
    assert_eq!(read(&out1, "report.json"), read(&out2, "report.json"));

    // The manifest records the digest of the config bytes actually read.
    let manifest = json(&out1, "manifest.json");
    let expected: String = Sha256::digest(fs::read(&config).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    assert_eq!(manifest["config_sha256"], expected.as_str());
    assert_eq!(manifest["command"], "solve-limit");
    assert_eq!(manifest["outputs"][0], "spectrum.csv");
}

#[test]
fn emitted_json_reparses_into_an_equal_structure() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "limit.json", LIMIT_CONFIG);
    let out = tmp.path().join("out");
    let run = run_cli(&[
        "solve-limit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);

    for name in ["report.json", "manifest.json"] {
        let first = json(&out, name);
        let reprinted = serde_json::to_string(&first).unwrap();
        let second: serde_json::Value = serde_json::from_str(&reprinted).unwrap();
        assert_eq!(first, second, "{name} does not round-trip");
    }
}

#[test]
fn decompose_on_identical_lists_reports_zero_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "fixture.json",
        r#"{
          "spectra": {
            "dumbbell": [1.0, 1.0, 2.5, 4.0, 7.25],
            "omega": [1.0, 2.5, 4.0, 9.0],
            "theta": [1.0, 7.25, 30.0],
            "n_modes": 5
          },
          "thresholds": { "max_deviation": 0.05 }
        }"#,
    );
    let out = tmp.path().join("out");
    let run = run_cli(&[
        "decompose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(run.stdout.contains("max deviation 0.000000e0"));

    let report = json(&out, "report.json");
    assert_eq!(report["comparison"]["max_deviation"], 0.0);
    assert_eq!(report["comparison"]["rows"].as_array().unwrap().len(), 5);
    // Geometry context is absent in list-only runs.
    assert!(report["epsilon"].is_null());

    let rows = csv_rows(&read(&out, "decomposition.csv"));
    assert_eq!(rows.len(), 5);
    // Mass and deficiency columns are empty without a mesh.
    assert_eq!(rows[0][5], "");
    assert_eq!(rows[0][7], "");
}

#[test]
fn decompose_gate_failure_exits_one() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "fixture.json",
        r#"{
          "spectra": {
            "dumbbell": [1.2, 2.5],
            "omega": [1.0, 2.5, 4.0],
            "theta": [30.0],
            "n_modes": 2
          },
          "thresholds": { "max_deviation": 0.05 }
        }"#,
    );
    let out = tmp.path().join("out");
    let run = run_cli(&[
        "decompose",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 1, "stdout: {}", run.stdout);
    assert!(run.stdout.contains("gate failed"));
}

#[test]
fn validate_profile_lists_violations_and_exits_one() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "bump.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "cosine_bump", "a": 1.0, "b": 0.5 }
          }
        }"#,
    );
    let out = tmp.path().join("out");
    let run = run_cli(&[
        "validate-profile",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 1, "stdout: {}", run.stdout);
    assert!(run.stdout.contains("holds = false"));
    assert!(run.stdout.contains("x = "), "violations should be listed");

    let report = json(&out, "report.json");
    assert_eq!(report["holds"], false);
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn validate_profile_accepts_a_monotone_profile() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "flat.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "constant", "value": 1.0 }
          }
        }"#,
    );
    let out = tmp.path().join("out");
    let run = run_cli(&[
        "validate-profile",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "stdout: {}", run.stdout);
    assert_eq!(json(&out, "report.json")["holds"], true);
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    let tmp = TempDir::new().unwrap();
    // Inside a section.
    let config = write_config(
        tmp.path(),
        "bad1.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "constant", "value": 1.0 },
            "bogus_knob": 3
          }
        }"#,
    );
    let run = run_cli(&["solve-dumbbell", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(
        run.stderr.contains("bogus_knob"),
        "stderr must name the key: {}",
        run.stderr
    );

    // At the top level.
    let config = write_config(tmp.path(), "bad2.json", r#"{ "mystery_section": {} }"#);
    let run = run_cli(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("mystery_section"), "{}", run.stderr);

    // Profile fields that belong to a different kind.
    let config = write_config(
        tmp.path(),
        "bad3.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "constant", "value": 1.0, "coeffs": [1.0] }
          }
        }"#,
    );
    let run = run_cli(&["validate-profile", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("coeffs"), "{}", run.stderr);
}

#[test]
fn missing_sections_are_named() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "nogeo.json",
        r#"{ "params": { "sigma": 0.3, "tau": 0.0 } }"#,
    );
    let run = run_cli(&["solve-limit", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("geometry"), "{}", run.stderr);

    let config = write_config(
        tmp.path(),
        "noparams.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "constant", "value": 1.0 }
          }
        }"#,
    );
    let run = run_cli(&["solve-limit", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("params"), "{}", run.stderr);

    let config = write_config(
        tmp.path(),
        "nosweep.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": { "kind": "constant", "value": 1.0 }
          },
          "params": { "sigma": 0.3, "tau": 0.0 }
        }"#,
    );
    let run = run_cli(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("sweep"), "{}", run.stderr);
}

#[test]
fn invalid_values_are_rejected_with_the_offending_key() {
    let tmp = TempDir::new().unwrap();
    // ε too large for the profile: the channel would swallow the plates.
    let config = write_config(
        tmp.path(),
        "fat.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 1.5,
            "profile": { "kind": "constant", "value": 1.0 }
          },
          "params": { "sigma": 0.3, "tau": 0.0 }
        }"#,
    );
    let run = run_cli(&["solve-dumbbell", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("geometry"), "{}", run.stderr);

    // Eigenpair request beyond the discretized system.
    let config = write_config(
        tmp.path(),
        "bigk.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.05,
            "profile": { "kind": "constant", "value": 1.0 }
          },
          "params": { "sigma": 0.3, "tau": 0.0 },
          "discretization": { "nx": 2, "ny": 2 },
          "solver": { "k": 500 }
        }"#,
    );
    let run = run_cli(&["solve-channel", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("solver.k"), "{}", run.stderr);
}

const SWEEP_CONFIG: &str = r#"{
  "geometry": {
    "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
    "profile": { "kind": "constant", "value": 1.0 }
  },
  "params": { "sigma": 0.3, "tau": 0.0 },
  "discretization": { "nx": 24, "ny": 6, "n_elems_1d": 128 },
  "sweep": { "mode": "channel_limit", "epsilon_grid": [0.4, 0.2], "n_modes": 1 },
  "solver": { "k": 1, "tol": 1e-6, "max_iters": 400, "seed": 42 }
}
"#;

#[test]
fn sweep_emits_the_table_and_is_thread_count_independent() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "sweep.json", SWEEP_CONFIG);
    let out1 = tmp.path().join("jobs1");
    let out2 = tmp.path().join("jobs2");

    for (out, jobs) in [(&out1, "1"), (&out2, "2")] {
        let run = run_cli(&[
            "sweep",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    }

    let csv = read(&out1, "sweep.csv");
    assert!(csv.starts_with("epsilon,index,value,reference,rel_error,tag\n"));
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    // The channel eigenvalue approaches the limit value from above as
    // ε shrinks, so the relative error at ε = 0.2 beats ε = 0.4.
    let err_04: f64 = rows[0][4].parse().unwrap();
    let err_02: f64 = rows[1][4].parse().unwrap();
    assert!(err_02 < err_04, "errors should shrink: {err_04} -> {err_02}");
    assert_eq!(rows[0][5], "channel(1)");

    // Grid-order output is independent of the pool size.
    assert_eq!(csv, read(&out2, "sweep.csv"));

    let report = json(&out1, "report.json");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_dumbbell_masses_partition_and_dirichlet_clamps() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(
        tmp.path(),
        "dumbbell.json",
        r#"{
          "geometry": {
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.3,
            "profile": { "kind": "constant", "value": 1.0 }
          },
          "params": { "sigma": 0.3, "tau": 0.0 },
          "discretization": { "h_target": 0.15 },
          "solver": { "k": 2, "tol": 1e-6, "max_iters": 400, "seed": 42 }
        }"#,
    );

    let free_out = tmp.path().join("free");
    let run = run_cli(&[
        "solve-dumbbell",
        "--config",
        config.to_str().unwrap(),
        "--out",
        free_out.to_str().unwrap(),
        "--dump-matrices",
        "--dump-mesh",
    ]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);

    let rows = csv_rows(&read(&free_out, "spectrum.csv"));
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let mass_omega: f64 = row[3].parse().unwrap();
        let mass_channel: f64 = row[4].parse().unwrap();
        assert!(
            (mass_omega + mass_channel - 1.0).abs() < 1e-9,
            "mass fractions must partition: {mass_omega} + {mass_channel}"
        );
    }
    // Free plate: the lowest mode is the zero-bending one at exactly 1.
    let lambda1: f64 = rows[0][1].parse().unwrap();
    assert!((lambda1 - 1.0).abs() < 1e-6);

    for name in ["k_matrix.csv", "m_matrix.csv"] {
        let dump = read(&free_out, name);
        assert!(dump.starts_with("row,col,value\n"));
        assert!(dump.lines().count() > 10);
    }
    let mesh = json(&free_out, "mesh.json");
    assert!(!mesh["nodes"].as_array().unwrap().is_empty());

    // Clamping the whole boundary removes the zero-bending modes.
    let clamped_out = tmp.path().join("clamped");
    let run = run_cli(&[
        "solve-dumbbell",
        "--config",
        config.to_str().unwrap(),
        "--out",
        clamped_out.to_str().unwrap(),
        "--dirichlet",
    ]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    let rows = csv_rows(&read(&clamped_out, "spectrum.csv"));
    let lambda1_clamped: f64 = rows[0][1].parse().unwrap();
    assert!(
        lambda1_clamped > 10.0,
        "clamped fundamental should sit far above 1, got {lambda1_clamped}"
    );
    let manifest = json(&clamped_out, "manifest.json");
    assert_eq!(manifest["flags"]["dirichlet"], true);
}

#[test]
fn jobs_zero_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "limit.json", LIMIT_CONFIG);
    let run = run_cli(&[
        "solve-limit",
        "--config",
        config.to_str().unwrap(),
        "--jobs",
        "0",
    ]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("--jobs"), "{}", run.stderr);
}

#[test]
fn output_dir_can_come_from_the_config() {
    let tmp = TempDir::new().unwrap();
    let nested = tmp.path().join("nested").join("deeper");
    let body = format!(
        r#"{{
          "geometry": {{
            "left_len": 1.0, "right_len": 1.0, "epsilon": 0.1,
            "profile": {{ "kind": "constant", "value": 1.0 }}
          }},
          "output": {{ "dir": {} }}
        }}"#,
        serde_json::to_string(nested.to_str().unwrap()).unwrap()
    );
    let config = write_config(tmp.path(), "withdir.json", &body);
    let run = run_cli(&["validate-profile", "--config", config.to_str().unwrap()]);
    assert_eq!(run.code, 0, "stderr: {}", run.stderr);
    assert!(nested.join("report.json").exists());
    assert!(nested.join("manifest.json").exists());
}
