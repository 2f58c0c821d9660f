use std::path::Path;
use std::process::{Command, Output};

use bcasc::codefile::read_code;
use bcasc::manifest::{RunManifest, MANIFEST_FILE};
use bcasc::table::Table;
use bcasc_core::codes::coherence;

const QUICK: [&str; 6] = ["--tau-max", "300", "--nu-max", "256", "--nrot", "8"];

fn bcasc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcasc")).args(args).env_remove("BCASC_OUT_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bcasc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn bounds_output() {
    let text = ok(&["bounds", "--m", "4", "--n", "5"]);
    assert!(text.contains("value        0.2500"));
    assert!(text.contains("regime       welch"));
    let v: serde_json::Value = serde_json::from_str(&ok(&["bounds", "--m", "8", "--n", "128", "--json"])).unwrap();
    assert_eq!(format!("{:.4}", v["value"].as_f64().unwrap()), "0.4128");
    assert_eq!(v["regime"], "Levenshtein");
    let text = ok(&["bounds", "--m", "4", "--n", "4"]);
    assert!(text.contains("value        0.0000") && text.contains("orthonormal"));
}

#[test]
fn exit_codes() {
    assert_eq!(bcasc(&["bounds", "--m", "4"]).status.code(), Some(1));
    assert_eq!(bcasc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bcasc(&["construct", "--m", "2", "--n", "3", "--alpha0", "1.5"]).status.code(), Some(1));
    assert_eq!(bcasc(&["--help"]).status.code(), Some(0));
    assert_eq!(bcasc(&["--version"]).status.code(), Some(0));
    let out = bcasc(&["coherence", "/nonexistent/code.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/code.json"));
}

#[test]
fn construct_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let mut args = vec!["construct", "--m", "3", "--n", "6", "--runs", "3", "--seed", "5", "--out", d.to_str().unwrap()];
        args.extend(QUICK);
        ok(&args);
    }
    for name in ["code.json", "runs.csv", "stages.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let manifest = RunManifest::read(&a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.seeds, vec![5, 6, 7]);
    assert!(manifest.bit_exact);
    assert!(manifest.verify(&a).unwrap().is_empty());
    assert_eq!(manifest.artifact_hash, RunManifest::read(&b.join(MANIFEST_FILE)).unwrap().artifact_hash);

    // the best coherence in runs.csv is the coherence of code.json, bit for bit
    let (code, meta) = read_code(&a.join("code.json")).unwrap();
    let mu = coherence(&code).unwrap().mu;
    let runs = Table::read(&a.join("runs.csv")).unwrap();
    let best = runs.floats("coherence").unwrap().into_iter().flatten().fold(f64::INFINITY, f64::min);
    assert_eq!(best.to_bits(), mu.to_bits());
    assert_eq!(meta["coherence"].as_f64().unwrap().to_bits(), mu.to_bits());
    let stages = Table::read(&a.join("stages.csv")).unwrap();
    assert_eq!(stages.rows.len(), 7);
    assert_eq!(stages.to_bytes().unwrap(), read(&a, "stages.csv"));
}

#[test]
fn full_neighbor_policy_and_out_dir_env() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["construct", "--m", "2", "--n", "4", "--runs", "1", "--neighbor", "full", "--json"];
    args.extend(QUICK);
    let out = Command::new(env!("CARGO_BIN_EXE_bcasc")).args(&args).env("BCASC_OUT_DIR", dir.path()).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["best_coherence"].as_f64().unwrap() >= v["composite_bound"].as_f64().unwrap() - 1e-12);
    assert!(dir.path().join("code.json").exists());
}

#[test]
fn radius_sweep_marks_empty_balls_as_failed() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep", "--axis", "radius", "--values", "0.05,2", "--m", "3", "--n", "8", "--runs", "2", "--neighbor", "radius",
        "--out", dir.path().to_str().unwrap(),
    ];
    args.extend(QUICK);
    ok(&args);
    let t = Table::read(&dir.path().join("sweep.csv")).unwrap();
    let status = t.column("status").unwrap();
    assert_eq!(t.rows[0][status], "failed");
    assert_eq!(t.rows[1][status], "ok");
    assert_eq!(t.floats("value").unwrap(), vec![Some(0.05), Some(2.0)]);
}

#[test]
fn n_sweep_reports_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep", "--axis", "n", "--values", "8:16:4", "--m", "3", "--runs", "1", "--json", "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend(QUICK);
    let v: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert!(v["time_vs_n_fit"]["r2"].is_number());
}

#[test]
fn phase_diagram_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for d in [&a, &b] {
        ok(&["phase-diagram", "--n", "16", "--grid", "4", "--kind", "gaussian", "--seed", "3", "--out", d.to_str().unwrap()]);
    }
    for name in ["cells.csv", "columns.csv", "histogram.csv", "survivor.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    ok(&["phase-diagram", "--n", "16", "--grid", "4", "--kind", "gaussian", "--seed", "3", "--threads", "2", "--out", c.to_str().unwrap()]);
    assert_eq!(read(&a, "cells.csv"), read(&c, "cells.csv"));
    assert!(!RunManifest::read(&c.join(MANIFEST_FILE)).unwrap().bit_exact);

    let cells = Table::read(&a.join("cells.csv")).unwrap();
    assert_eq!(cells.rows.len(), 16);
    let (s, err) = (cells.column("s").unwrap(), cells.floats("error").unwrap());
    for (row, e) in cells.rows.iter().zip(&err) {
        if row[s] == "0" {
            assert!(e.unwrap() <= 1e-10);
        }
    }

    let st = dir.path().join("stats");
    ok(&["stats", a.join("cells.csv").to_str().unwrap(), "--out", st.to_str().unwrap()]);
    assert_eq!(read(&a, "histogram.csv"), read(&st, "histogram.csv"));
    assert_eq!(read(&a, "survivor.csv"), read(&st, "survivor.csv"));
}
