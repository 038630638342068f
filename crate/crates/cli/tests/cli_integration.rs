//! End-to-end tests of the `passlab` binary: config handling, exit codes,
//! output schemas, and byte-identical reruns.

use std::path::Path;
use std::process::{Command, Output};

fn passlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passlab"))
        .args(args)
        .output()
        .expect("binary must run")
}

fn write_selection_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("selection.json");
    std::fs::write(
        &path,
        serde_json::json!({
            "kind": "selection",
            "seeds": [1, 2],
            "parallel": 2,
            "selection": {
                "tasks": 6,
                "n": 5,
                "m": 5,
                "domain_size": 5,
                "ambiguity_level": 0.0,
                "fidelity": 0.8,
                "suite_size": 3,
                "corruption": 0.1,
                "heuristics": ["Random", "MaxPassSoft", "CodeTSoft"]
            }
        })
        .to_string(),
    )
    .unwrap();
    path
}

#[test]
fn selection_run_writes_schema_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_selection_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");

    let run_a = passlab(&[
        "run-selection",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert!(run_a.status.success(), "{}", String::from_utf8_lossy(&run_a.stderr));
    let run_b = passlab(&[
        "run-selection",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert!(run_b.status.success());

    let csv_a = std::fs::read(out_a.join("selection.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("selection.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("seed,task,heuristic,pass_at_1\n"));
    assert!(out_a.join("manifest.json").exists());
}

#[test]
fn heuristics_flag_overrides_case_insensitively() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_selection_config(dir.path());
    let out = dir.path().join("out");
    let run = passlab(&[
        "run-selection",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "9",
        "--heuristics",
        "maxpasshard,codetsoft",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out.join("selection.csv")).unwrap();
    assert!(text.contains("MaxPassHard"));
    assert!(text.contains("CodeTSoft"));
    assert!(!text.contains("Random"));
    assert!(!text.contains("\n1,"));
    assert!(text.contains("\n9,"));
}

#[test]
fn unknown_config_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"kind": "selection", "seeds": [1], "bogus": true}"#).unwrap();
    let run = passlab(&["run-selection", "--config", path.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("bogus"), "{stderr}");
}

#[test]
fn kind_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_selection_config(dir.path());
    let run = passlab(&["run-bandit", "--config", config.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn verify_filter_runs_named_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = passlab(&["verify", "--filter", "greedy", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("greedy-optimality"), "{stdout}");
    assert!(stdout.contains("PASS"), "{stdout}");
    let text = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(text.starts_with("check,passed,elapsed_ms,details\n"));
}

#[test]
fn verify_unknown_filter_lists_names_and_exits_2() {
    let run = passlab(&["verify", "--filter", "nonsense"]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("kernel-axioms"), "{stderr}");
    assert!(stderr.contains("refinement-regimes"), "{stderr}");
}

#[test]
fn gen_env_writes_versioned_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_selection_config(dir.path());
    let out = dir.path().join("snap");
    let run = passlab(&[
        "gen-env",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out.join("snapshot.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert_eq!(value["environment"]["mode"], "binary");
    assert_eq!(value["codes"].as_array().unwrap().len(), 5);
}

#[test]
fn refinement_run_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("refine.json");
    std::fs::write(
        &path,
        serde_json::json!({
            "kind": "refinement",
            "seeds": [0, 1, 2],
            "refinement": {
                "domain_size": 6,
                "alphabet_size": 2,
                "ambiguity_level": 0.34,
                "reveal_examples": false,
                "rounds": 4,
                "factorization": "independent",
                "compression": "summary_concat",
                "feedback_mode": "self_test",
                "suite_size": 3,
                "corruption": 0.1,
                "prior_confidence": 0.8
            }
        })
        .to_string(),
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = passlab(&["run-refine", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out.join("refinement.csv")).unwrap();
    assert!(text.starts_with("seed,round,oracle_rate,self_rate,mode,factorization,compression\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 4);
}
