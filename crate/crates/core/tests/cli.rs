//! The `trafficmon` binary: subcommand output and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::workspace;

fn trafficmon(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trafficmon"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_the_shipped_corpus() {
    let dir = workspace::corpus_copy(&[]);
    let out = trafficmon(&workspace::config_path(&dir), &["validate"]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("30 scenarios ok"));
    assert!(stdout(&out).contains("4 cameras ok"));
}

#[test]
fn validate_reports_a_broken_alias_table() {
    let dir = workspace::corpus_copy(&["s01"]);
    let path = dir.path().join("aliases/cam-ne.json");
    let mut db: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    db["names"] = serde_json::json!({});
    std::fs::write(&path, serde_json::to_vec(&db).unwrap()).unwrap();

    let out = trafficmon(&workspace::config_path(&dir), &["validate"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    assert!(stdout(&out).contains("cam-ne"));
}

#[test]
fn simulate_writes_frames_and_sidecars() {
    let dir = workspace::corpus_copy(&["s03"]);
    let out_dir = dir.path().join("frames");
    let out = trafficmon(
        &workspace::config_path(&dir),
        &["simulate", "--scenario", "s03", "--out", out_dir.to_str().unwrap()],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(
        stdout(&out).starts_with("28 frames from 1 scenarios"),
        "{}",
        stdout(&out)
    );
    let files: Vec<_> = walk(&out_dir);
    let ppm = files
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "ppm"))
        .count();
    let json = files
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .count();
    assert_eq!((ppm, json), (28, 28));
}

#[test]
fn evaluate_with_the_exact_oracle_is_perfect() {
    let dir = workspace::corpus_copy(&["s03"]);
    let report = dir.path().join("report.json");
    let out = trafficmon(
        &workspace::config_path(&dir),
        &["evaluate", "--report", report.to_str().unwrap()],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(
        stdout(&out).contains("location 1.0000  steering 1.0000  collision 1.0000"),
        "{}",
        stdout(&out)
    );
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(report).unwrap()).unwrap();
    assert_eq!(report["frames_scored"], 28);
}

#[test]
fn input_errors_exit_with_code_3() {
    let dir = workspace::corpus_copy(&["s03"]);
    let config = workspace::config_path(&dir);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["simulate", "--out", out, "--scenario", "s99"],
        vec!["evaluate", "--p-loc", "1.5"],
        vec!["evaluate", "--responder", "remote"],
        vec!["export-dataset", "--out", out, "--drop-rate=-0.1"],
    ] {
        let result = trafficmon(&config, &args);
        assert_eq!(result.status.code(), Some(3), "{args:?}: {result:?}");
        assert!(String::from_utf8_lossy(&result.stderr).starts_with("error: "));
    }
    let missing = trafficmon(&dir.path().join("absent.json"), &["validate"]);
    assert_eq!(missing.status.code(), Some(3));
    let usage = trafficmon(&config, &["simulate"]);
    assert_eq!(usage.status.code(), Some(2));
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}
