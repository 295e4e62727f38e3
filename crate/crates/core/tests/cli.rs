use std::fs;
use std::process::Command;

use bell_efficiency::functional::{BellFunctional, Layout};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bell-eff"))
}

#[test]
fn reproduce_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["reproduce", "chsh", "--seed", "5", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("chsh.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 5);
    assert!(json["config"]["parallelism"].as_u64().unwrap() >= 1);
    assert_eq!(json["data"]["profile"]["l_provenance"], "exact");
    let f = BellFunctional::parse_block_text(&fs::read_to_string(dir.path().join("chsh.txt")).unwrap()).unwrap();
    assert_eq!(f.inputs(), 2);
}

#[test]
fn threshold_of_a_file() {
    let out = bin()
        .args(["threshold", concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sym_n2.txt"), "--n", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let eta = r["eta_sym"].as_f64().unwrap();
    assert!((eta - (28.0 * 2f64.sqrt() - 21.0) / 23.0).abs() < 1e-12);
}

#[test]
fn block_text_roundtrip_is_byte_identical() {
    let f = BellFunctional::parse_block_text(include_str!("data/sym_n2.txt")).unwrap();
    assert!(f.is_integer());
    let canonical = f.to_block_text(Layout::Reduced).unwrap();
    let again = BellFunctional::parse_block_text(&canonical).unwrap().to_block_text(Layout::Reduced).unwrap();
    assert_eq!(canonical, again);
}

#[test]
fn truncated_file_names_the_block() {
    let text = include_str!("data/sym_n2.txt");
    let cut: String = text.lines().take(text.lines().count() - 3).map(|l| format!("{l}\n")).collect();
    let err = BellFunctional::parse_block_text(&cut).unwrap_err().to_string();
    assert!(err.contains("joint"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.txt");
    fs::write(&path, cut).unwrap();
    let out = bin().args(["local-bound"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin().args(["reproduce", "nonsense"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["chshn", "--n", "9"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn heuristic_local_bound_is_seeded() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sym_n2.txt");
    let run = || bin().args(["local-bound", path, "--bound", "heuristic", "--restarts", "20", "--seed", "4"]).output().unwrap().stdout;
    let first = run();
    assert_eq!(first, run());
    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert!(v["value"].as_f64().unwrap() <= 0.0);
}
