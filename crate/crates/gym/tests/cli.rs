mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixtures;
use serde_json::Value;
use spatial_gym::document::{read_puzzle, Manifest, SolverReport, VerdictReport};
use spatial_gym::log::Replay;

fn gym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatial-gym")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

fn stdout_json<T: serde::de::DeserializeOwned>(out: &Output) -> T {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find_map(|l| l.strip_prefix("error: ")).expect("error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn verify_worked_path() {
    let out = gym(&["verify", &fixture("stars_2x2.puz"), "--path", "(0,1)->(0,2)->(0,3)->(0,4)->(1,4)->(2,4)"]);
    let report: VerdictReport = stdout_json(&out);
    assert!(report.verdict.satisfied);
    assert_eq!(report.puzzle_id, "c2f1726c32030b96");

    let out = gym(&["verify", &fixture("stars_2x2.puz"), "--path", "DD"]);
    let report: VerdictReport = stdout_json(&out);
    assert!(!report.verdict.satisfied);
    assert!(!report.verdict.violations.is_empty());

    let out = gym(&["verify", &fixture("stars_2x2.puz"), "--path", "(0,1)->(2,2)"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["kind"], "invalid_path");
}

#[test]
fn solve_ring() {
    let report: SolverReport = stdout_json(&gym(&["solve", &fixture("ring.puz")]));
    assert_eq!(report.n_solutions, 2);
    assert!(report.exhausted);
    assert_eq!(report.cap, 51);
    let capped: SolverReport = stdout_json(&gym(&["solve", &fixture("ring.puz"), "--max-solutions", "1", "--no-prune"]));
    assert_eq!(capped.n_solutions, 1);
    assert!(!capped.exhausted);
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| gym(&["generate", "--count", "5", "--seed", "7", "--max-cols", "4", "--max-rows", "4", "--out", dir.to_str().unwrap()]);
    let ma: Manifest = stdout_json(&run(a.path()));
    let mb: Manifest = stdout_json(&run(b.path()));
    assert_eq!(ma, mb);
    assert_eq!(ma.puzzles.len(), 5);
    assert_eq!(ma.seed, Some(7));
    for entry in &ma.puzzles {
        let fa = std::fs::read(a.path().join(&entry.file)).unwrap();
        assert_eq!(fa, std::fs::read(b.path().join(&entry.file)).unwrap());
        let puzzle = read_puzzle(&a.path().join(&entry.file)).unwrap();
        assert_eq!(puzzle.id(), entry.puzzle_id);
        assert!((1..=50).contains(&entry.n_solutions) && entry.exhausted);
    }
    let on_disk: Manifest = serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, ma);
}

#[test]
fn missing_seed_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("one.puz");
    let out = gym(&["generate", "--max-cols", "2", "--max-rows", "2", "--out", file.to_str().unwrap()]);
    let manifest: Manifest = stdout_json(&out);
    let seed = manifest.seed.unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("using {seed}")));
    assert!(read_puzzle(&file).is_ok());
}

#[test]
fn eval_then_replay() {
    let out_dir = tempfile::tempdir().unwrap();
    let logs = tempfile::tempdir().unwrap();
    let out = gym(&[
        "eval", "--agent", "astar", "--mode", "no-backtrack", "--puzzles", &fixtures().display().to_string(),
        "--out", out_dir.path().to_str().unwrap(), "--seed", "1", "--parallel", "2",
        "--log-dir", logs.path().to_str().unwrap(),
    ]);
    let summary: Value = stdout_json(&out);
    let report = &summary["report"];
    assert_eq!(report["n_episodes"], 3);
    assert_eq!(report["completion_rate"], 100.0);
    assert!(report["accuracy"].as_f64().unwrap() <= 100.0);
    assert!(out_dir.path().join("report.txt").exists());
    let records = std::fs::read_to_string(out_dir.path().join("records.jsonl")).unwrap();
    for line in records.lines() {
        let _: spatial_gym_core::metrics::EpisodeRecord = serde_json::from_str(line).unwrap();
    }

    let replays: Vec<Replay> = stdout_json(&gym(&["replay", logs.path().to_str().unwrap()]));
    assert_eq!(replays.len(), 3);
    assert!(replays.iter().all(|r| r.integrity.ok));
}

#[test]
fn eval_requires_an_agent() {
    let dir = tempfile::tempdir().unwrap();
    let out = gym(&["eval", "--puzzles", &fixtures().display().to_string(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["kind"], "usage");
    let out = gym(&["eval", "--agent", "chat", "--puzzles", &fixtures().display().to_string(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(error_line(&out)["kind"], "agent_binding");
}

#[test]
fn usage_and_io_errors() {
    let out = gym(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["kind"], "usage");
    let out = gym(&["solve", "/definitely/missing.puz"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["kind"], "io");
    let out = gym(&["replay", &fixture("ring.puz")]);
    assert_eq!(error_line(&out)["kind"], "corrupt_log");
}

#[test]
fn import_upstream_records() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("records.jsonl");
    let records = [
        serde_json::json!({
            "id": "up-1",
            "difficulty_score": 1.22,
            "puzzle_array": [["+","+","+","+","+"],["S","*-Y","+","*-Y","+"],["+","+","+","+","+"],["+","*-K","+","*-K","+"],["+","+","E","+","+"]],
            "polyshapes": "{}",
            "solutions": [{"path": [{"x":0,"y":1},{"x":0,"y":2},{"x":0,"y":3},{"x":0,"y":4},{"x":1,"y":4},{"x":2,"y":4}]}]
        }),
        serde_json::json!({
            "id": 2,
            "puzzle_array": [["+","+","+","+","+",".","+"],["S","N","+","P-R-16","+","o-B","+"],["+","+","+","+","+","+","+"],["+","N","+","N","+","o-B","+"],["+","+","E","+","+","+","+"]],
            "polyshapes": {"16": [[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}
        }),
        serde_json::json!({"id": "bad", "puzzle_array": [["S","Q"]]}),
    ];
    std::fs::write(&input, records.iter().map(|r| format!("{r}\n")).collect::<String>()).unwrap();
    let out_dir = dir.path().join("out");
    let summary: Value = stdout_json(&gym(&["import", input.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    assert_eq!(summary["imported"], 2);
    assert_eq!(summary["failed"][0]["index"], 2);
    assert_eq!(summary["reference_solutions_failing"], serde_json::json!([]));
    let manifest: Manifest = serde_json::from_value(summary["manifest"].clone()).unwrap();
    assert_eq!(manifest.puzzles[0].level, Some(2));
    assert_eq!(manifest.puzzles[1].n_solutions, 1);
    let imported = read_puzzle(&out_dir.join("2.puz")).unwrap();
    assert_eq!(imported.shape(16).unwrap().area(), 1);
}
