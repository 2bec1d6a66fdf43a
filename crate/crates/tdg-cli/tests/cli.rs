//! Exit-code and surface-format checks for the `tdg` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const TDG: &str = env!("CARGO_BIN_EXE_tdg");

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[test]
fn missing_template_dir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(TDG)
        .args(["generate", "--templates"])
        .arg(dir.path().join("nope"))
        .arg("--lexicon")
        .arg(data_dir().join("lexicon.json"))
        .arg("--out")
        .arg(dir.path().join("out.jsonl"))
        .arg("--manifest")
        .arg(dir.path().join("m.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_reject_reward_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(TDG)
        .args(["generate", "--templates"])
        .arg(data_dir().join("templates"))
        .arg("--lexicon")
        .arg(data_dir().join("lexicon.json"))
        .arg("--out")
        .arg(dir.path().join("out.jsonl"))
        .arg("--manifest")
        .arg(dir.path().join("m.json"))
        .args(["--reject-reward", "-2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn verify_rejects_tampered_corpus_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let status = Command::new(TDG)
        .args(["generate", "--templates"])
        .arg(data_dir().join("templates"))
        .arg("--lexicon")
        .arg(data_dir().join("lexicon.json"))
        .arg("--out")
        .arg(&corpus)
        .arg("--manifest")
        .arg(dir.path().join("m.json"))
        .args(["--per-template", "5", "--seed", "1"])
        .status()
        .unwrap();
    assert!(status.success());

    // flip one stored result
    let text = fs::read_to_string(&corpus).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut record: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    let r = record["result"].as_i64().unwrap();
    record["result"] = serde_json::json!(r + 1);
    lines[0] = serde_json::to_string(&record).unwrap();
    fs::write(&corpus, lines.join("\n") + "\n").unwrap();

    let status = Command::new(TDG).arg("verify").arg("--in").arg(&corpus).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn stats_table_lists_all_fields() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let status = Command::new(TDG)
        .args(["generate", "--templates"])
        .arg(data_dir().join("templates"))
        .arg("--lexicon")
        .arg(data_dir().join("lexicon.json"))
        .arg("--out")
        .arg(&corpus)
        .arg("--manifest")
        .arg(dir.path().join("m.json"))
        .args(["--per-template", "5", "--seed", "1"])
        .status()
        .unwrap();
    assert!(status.success());

    let output = Command::new(TDG).arg("stats").arg("--in").arg(&corpus).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    for needle in ["problem", "solution_code", "solution_nl", "tok.mean", "ch.std"] {
        assert!(text.contains(needle), "stats table missing `{needle}`:\n{text}");
    }
}

#[test]
fn draft_stub_output_passes_audit() {
    let out = Command::new(TDG)
        .args(["draft", "--topic", "splitting a bill", "--stub"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let tpl_path = dir.path().join("draft.tdg.json");
    fs::write(&tpl_path, &out.stdout).unwrap();

    let status = Command::new(TDG)
        .arg("audit")
        .arg("--template")
        .arg(&tpl_path)
        .arg("--lexicon")
        .arg(data_dir().join("lexicon.json"))
        .args(["-n", "25", "--seed", "3"])
        .status()
        .unwrap();
    assert!(status.success(), "stub draft should be admitted");
}
