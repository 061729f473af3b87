use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn knot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knot"))
        .args(args)
        .current_dir(dir)
        .env_remove("KNOT_CONFIG")
        .env_remove("KNOT_BACKEND")
        .env_remove("KNOT_PLAN_BACKEND")
        .env_remove("KNOT_LIVE")
        .output()
        .expect("spawn knot")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets").join(rel)
}

#[test]
fn run_prints_answer_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = knot(dir.path(), &["run", "--task", "arithmetic", "--size", "8", "--seed", "11", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["correct"], true);
    assert_eq!(summary["answer"], summary["ground_truth"]);
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert!(trace.lines().last().unwrap().contains("\"summary\""));
}

#[test]
fn unknown_task_fails_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = knot(dir.path(), &["run", "--task", "chess"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown task"));
}

#[test]
fn strict_replay_miss_names_prompt() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let o = knot(dir.path(), &["--backend", "replay:empty.jsonl", "run", "--task", "sorting"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("prompt not in fixture"), "{}", stderr(&o));
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let o = knot(dir.path(), &["record", "--task", "large_digit", "--size", "8", "--seed", "4", "--out", "fx.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let live = knot(dir.path(), &["run", "--task", "large_digit", "--size", "8", "--seed", "4", "--trace", "a.jsonl"]);
    let replayed = knot(
        dir.path(),
        &[
            "--backend",
            "replay:fx.jsonl",
            "run",
            "--task",
            "large_digit",
            "--size",
            "8",
            "--seed",
            "4",
            "--trace",
            "b.jsonl",
        ],
    );
    assert!(replayed.status.success(), "{}", stderr(&replayed));
    assert_eq!(stdout(&live), stdout(&replayed));
}

#[test]
fn bench_writes_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        knot(dir.path(), &["bench", "--tasks", "sorting", "-n", "100", "--out", "report.json", "--csv", "grid.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = report["results"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row["accuracy"], 1.0);
        assert_eq!(row["n_samples"], 100);
    }
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "scheme,ablation,sorting-16,sorting-32,sorting-64");
}

#[test]
fn bench_rejects_zero_samples_and_labels_ablation() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!knot(dir.path(), &["bench", "--tasks", "sorting", "-n", "0"]).status.success());
    let o = knot(dir.path(), &["bench", "--tasks", "sorting", "--sizes", "16", "-n", "3", "--ablation", "110111"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["results"][0]["ablation"], "110111");
    assert!(!knot(dir.path(), &["bench", "--tasks", "sorting", "--sizes", "17", "-n", "1"]).status.success());
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = knot(dir.path(), &["validate", fixture("fixtures/arithmetic/appendix_1p5.lwt").to_str().unwrap()]);
    assert!(ok.status.success());
    assert!(stdout(&ok).contains("0 errors"));
    std::fs::write(dir.path().join("fwd.lwt"), "(0)=LLM(\"use {(1)}\")\n(1)=LLM(\"x\")\n").unwrap();
    let bad = knot(dir.path(), &["validate", "fwd.lwt"]);
    assert!(!bad.status.success());
    assert!(stdout(&bad).contains("ForwardReference"));
}

#[test]
fn graph_of_eight_instruction_script() {
    let dir = tempfile::tempdir().unwrap();
    let path = fixture("fixtures/arithmetic/appendix_5x5.lwt");
    let o = knot(dir.path(), &["graph", path.to_str().unwrap(), "--out", "g.dot"]);
    assert!(o.status.success());
    let dot = std::fs::read_to_string(dir.path().join("g.dot")).unwrap();
    let nodes = dot.matches("[label=\"(").count();
    assert_eq!(nodes, 8);
    assert!(dot.contains("in_input"));
    let json = knot(dir.path(), &["graph", path.to_str().unwrap(), "--format", "json"]);
    let script: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(script["instructions"].as_array().unwrap().len(), 8);
}

#[test]
fn ablate_emits_seven_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = knot(dir.path(), &["ablate", "--task", "sorting", "-n", "2", "--out", "ablate.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ablate.json")).unwrap()).unwrap();
    let masks: Vec<&str> =
        report["results"].as_array().unwrap().iter().map(|r| r["ablation"].as_str().unwrap()).collect();
    assert_eq!(masks, ["111111", "011111", "101111", "110111", "111011", "111101", "111110"]);
}

#[test]
fn http_needs_live_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = knot(dir.path(), &["--backend", "http", "run", "--task", "sorting"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--live"));
}

#[test]
fn config_file_sets_backend() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("knot.toml"), "backend = \"oracle\"\n").unwrap();
    // the pure oracle has no sentiment handler, so yelp fails under this config
    let o = knot(dir.path(), &["--config", "knot.toml", "run", "--task", "yelp"]);
    assert!(!o.status.success());
    let o = knot(dir.path(), &["--config", "knot.toml", "--backend", "corpus", "run", "--task", "yelp"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
