use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqstrat")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

fn corpus(dir: &Path) {
    ok(dir, &["synth", "--seed", "2", "--sequences", "4", "--scans", "20", "--labels", "6", "--points", "100", "--root", "kitti"]);
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["split", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["segment", "--manifest", "manifest.jsonl", "--granularity", "5"]);
    let out = run(d, &["split", "--segments", "segments.jsonl", "--method", "msss", "--ratios", "0.8,0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_from_tree_to_ranked_pool() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["ingest", "--root", "kitti", "--out", "ingested.jsonl"]);
    ok(d, &["segment", "--manifest", "ingested.jsonl", "--granularity", "5"]);
    ok(d, &["split", "--segments", "segments.jsonl", "--method", "msegsss", "--ratios", "0.75,0.25", "--seed", "1"]);
    ok(d, &["evaluate", "--split", "split.json", "--segments", "segments.jsonl"]);
    ok(d, &["rank", "--segments", "segments.jsonl", "--n", "5", "--ratios", "0.75,0.25", "--seed", "4"]);

    let split = json(d, "split.json");
    assert_eq!(split["provenance"]["command"], "split");
    assert_eq!(split["provenance"]["config"]["seed"], 1);
    let report = json(d, "report.json");
    assert!(report["report"].is_object());
    let pool = json(d, "pool.json");
    assert_eq!(pool["pool"]["entries"].as_array().map(Vec::len), Some(15));
    assert!(d.join("best_split.json").is_file());
    ok(d, &["evaluate", "--split", "best_split.json", "--segments", "segments.jsonl", "--out", "best_report.json"]);
}

#[test]
fn evaluate_mismatch_emits_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["segment", "--manifest", "manifest.jsonl", "--granularity", "5", "--out", "fine.jsonl"]);
    ok(d, &["segment", "--manifest", "manifest.jsonl", "--granularity", "sequence", "--out", "coarse.jsonl"]);
    ok(d, &["split", "--segments", "fine.jsonl", "--method", "random", "--ratios", "0.5,0.5", "--seed", "1"]);
    let out = run(d, &["evaluate", "--split", "split.json", "--segments", "coarse.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let record: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(record["error"]["kind"].is_string());
    assert!(record["error"]["message"].is_string());
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["segment", "--manifest", "manifest.jsonl", "--granularity", "5"]);
    std::fs::write(d.join("run.toml"), "seed = 6\n[split]\nmethod = \"msss\"\nratios = [0.5, 0.5]\n").unwrap();
    ok(d, &["--config", "run.toml", "split", "--segments", "segments.jsonl", "--out", "a.json"]);
    ok(d, &["--config", "run.toml", "split", "--segments", "segments.jsonl", "--seed", "8", "--out", "b.json"]);
    let a = json(d, "a.json");
    let b = json(d, "b.json");
    assert_eq!(a["provenance"]["config"]["seed"], 6);
    assert_eq!(a["provenance"]["config"]["method"], "msss");
    assert_eq!(b["provenance"]["config"]["seed"], 8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["al-plan", "--manifest", "manifest.jsonl", "--labeled", "00", "--steps", "2", "--budget", "3", "--strategy", "distance", "--seed", "3", "--out", "a.json"]);
    ok(d, &["al-plan", "--manifest", "manifest.jsonl", "--labeled", "00", "--steps", "2", "--budget", "3", "--strategy", "distance", "--seed", "3", "--out", "b.json"]);
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    let plan = json(d, "a.json");
    assert_eq!(plan["steps"].as_array().map(Vec::len), Some(2));
}
