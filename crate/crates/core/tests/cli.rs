mod common;

use std::path::Path;
use std::process::Command;

use common::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fsmguard"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = bin().args(args).output().expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let aes = fixture_path("aes_ctrl.v");
    let (code, out, _) = run(&["check", "--protected", "WAIT_KEY", p(&aes)]);
    assert_eq!(code, 1);
    assert_eq!(out.matches("(HD_NOT_ONE): Violated").count(), 3);
    assert!(out.contains("(MISSING_DEFAULT): Violated"));

    let (code, json, _) = run(&["check", "--json", "--protected", "WAIT_KEY", p(&aes)]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["violations"].as_array().unwrap().len(), 4);

    assert_eq!(run(&["check", p(&fixture_path("vending.v"))]).0, 0);
    assert_eq!(run(&["check", "missing.v"]).0, 2);
    assert_eq!(run(&["check", "--no-such-flag", p(&aes)]).0, 2);
    assert_eq!(run(&["check", p(&fixture_path("moore_conflict.v"))]).0, 2);
}

#[test]
fn inject_and_mitigate_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dl.v");
    let (code, _, err) = run(&[
        "inject", "--class", "static_deadlock", "--seed", "7", "--out", p(&out), p(&fixture_path("vending.v")),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.exists() && dir.path().join("dl.plan.json").exists());
    assert_eq!(run(&["check", p(&out)]).0, 1);

    let fixed = dir.path().join("fixed.v");
    let rep = dir.path().join("fixed.json");
    let (code, _, err) = run(&["mitigate", "--out", p(&fixed), "--report", p(&rep), p(&out)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(run(&["check", p(&fixed)]).0, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["fixed"][0], "STATIC_DEADLOCK");

    assert_eq!(run(&["inject", "--class", "nonsense", p(&fixture_path("vending.v"))]).0, 2);
}

#[test]
fn corpus_pipeline_score_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let args = |out: &Path| {
        vec![
            "gen-corpus".to_string(),
            "--mix".into(),
            "static_deadlock=2".into(),
            "--seed".into(),
            "4".into(),
            "--out".into(),
            p(out).to_string(),
            p(&fixture_path("vending.v")).to_string(),
            p(&fixture_path("traffic.v")).to_string(),
        ]
    };
    let a: Vec<String> = args(&corpus);
    assert_eq!(run(&a.iter().map(String::as_str).collect::<Vec<_>>()).0, 0);
    let again = dir.path().join("c2.jsonl");
    let b: Vec<String> = args(&again);
    assert_eq!(run(&b.iter().map(String::as_str).collect::<Vec<_>>()).0, 0);
    let text = std::fs::read_to_string(&corpus).unwrap();
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
    assert_eq!(text.lines().count(), 4);

    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        format!(
            "[provider]\nkind = \"mock\"\nscript = {:?}\n[provider.retry]\nbase_delay_ms = 0\n",
            fixture_path("fif_replay.mock")
        ),
    )
    .unwrap();
    let tr = dir.path().join("t.jsonl");
    let (code, _, err) = run(&["--config", p(&cfg), "run-pipeline", "--pipeline", "fif", "--corpus", p(&corpus), "--out", p(&tr)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read_to_string(&tr).unwrap().lines().count(), 4);

    // every replayed FIF table is all zero, so only the two clean records count as accurate
    let (code, out, err) = run(&["score", "--task", "detection", "--corpus", p(&corpus), "--transcripts", p(&tr)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"][0]["class"], "CLEAN");
    assert_eq!(v["rows"][0]["successes"], 2);
    assert_eq!(v["rows"][1]["class"], "STATIC_DEADLOCK");
    assert_eq!(v["rows"][1]["successes"], 0);
    assert_eq!(v["total"]["rate"], 50.0);
    assert!(v["provenance"]["provider"].as_str().unwrap().starts_with("mock"));

    let sw = dir.path().join("s.jsonl");
    let (code, _, err) = run(&["--config", p(&cfg), "sweep", "--pipeline", "fif", "--design", p(&fixture_path("rsa_ctrl.v")), "--out", p(&sw)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read_to_string(&sw).unwrap().lines().count(), 11);

    let (code, s1, _) = run(&["score", "--task", "mitigation", "--corpus", p(&corpus)]);
    assert_eq!(code, 0);
    let (_, s2, _) = run(&["score", "--task", "mitigation", "--corpus", p(&corpus)]);
    assert_eq!(s1, s2);
    let v: serde_json::Value = serde_json::from_str(&s1).unwrap();
    assert_eq!(v["total"]["rate"], 100.0);
    assert_eq!(v["provenance"]["provider"], "static-oracle");
}

#[test]
fn sanitize_writes_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.v");
    let (code, _, err) = run(&["sanitize", "--seed", "1", "--out", p(&out), p(&fixture_path("trojan_unit.v"))]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&out).unwrap().to_ascii_lowercase();
    assert!(!text.contains("trojan") && !text.contains("trigger"));
    let map: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.map.json")).unwrap()).unwrap();
    assert_eq!(map["renames"]["trojan_trigger_unit"], "u0");
}
