use std::path::Path;
use std::process::{Command, Output};

use rfs_core::{BitString, FSTree, FSTreeConfig, GFamily};
use serde_json::Value;

fn rfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfs"))
        .args(args)
        .env_remove("RFS_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut args = vec!["gen", "--out", &path];
    args.extend_from_slice(extra);
    let out = rfs(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

fn bs(s: &str) -> BitString {
    s.parse().unwrap()
}

#[test]
fn gen_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--lengths", "2,3,2", "--g", "majority", "--seed", "11"];
    let a = gen(dir.path(), "a.json", &args);
    let b = gen(dir.path(), "b.json", &args);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn gen_reads_the_seed_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_rfs"))
        .args(["gen", "--lengths", "2,2"])
        .env("RFS_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(json(&out)["seed"], 42);
}

#[test]
fn parity_generation_warns() {
    let out = rfs(&["gen", "--lengths", "2", "--depth", "2", "--g", "parity"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("linear g trivializes"));
    assert_eq!(json(&out)["trivializing"], true);
}

#[test]
fn depth_and_length_count_must_agree() {
    let out = rfs(&["gen", "--lengths", "2,2", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_all_tracks_agree_on_every_input() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(
        dir.path(),
        "t.json",
        &["--lengths", "2,2,2", "--g", "and", "--seed", "3"],
    );
    let out = rfs(&["solve", &f, "--compare-all", "--all-x1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["passed"], true);
    assert_eq!(r["runs"].as_array().unwrap().len(), 12);
    let tree = FSTree::from_json(&std::fs::read_to_string(&f).unwrap()).unwrap();
    for run in r["runs"].as_array().unwrap() {
        let x1 = bs(run["x1"].as_str().unwrap());
        assert_eq!(run["answer"], tree.eval_f(1, &[x1]).unwrap());
    }
}

#[test]
fn solve_ledgers_follow_the_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "t.json", &["--lengths", "2,3,2", "--seed", "5"]);
    let r = json(&rfs(&["solve", &f, "--track", "classical", "--x1", "10"]));
    let ledger = &r["runs"][0]["ledger"];
    assert_eq!(ledger, &r["runs"][0]["expected_counts"]);
    let total: u64 = ledger
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    // f_3 gets 3*2 calls, g_2 gets 3, g_1 gets 1
    assert_eq!(total, 6 + 3 + 1);

    let r = json(&rfs(&["solve", &f, "--track", "quantum", "--x1", "10"]));
    let total: u64 = r["runs"][0]["ledger"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(total, 4 + 2 + 1);
    assert!(r["runs"][0]["success_probability"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn solve_refuses_large_quantum_runs_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "big.json", &["--lengths", "8", "--depth", "2"]);
    let out = rfs(&["solve", &f, "--track", "quantum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    // the classical track has no cap
    assert!(rfs(&["solve", &f, "--track", "classical"]).status.success());
}

#[test]
fn ablation_reports_failure_below_the_top_level() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(
        dir.path(),
        "t.json",
        &["--lengths", "2,2,2", "--g", "and", "--seed", "7"],
    );
    let r = json(&rfs(&["ablate", &f, "--level", "2"]));
    assert_eq!(r["ablation"]["fails"], true);
    assert!(r["ablation"]["min_success_probability"].as_f64().unwrap() < 1.0 - 1e-3);

    let r = json(&rfs(&["ablate", &f, "--level", "2", "--track", "kickback"]));
    let first = r["ablation"]["first_discard_error"].as_str().unwrap();
    assert!(
        first.contains("x3") && first.contains("undefined input"),
        "{first}"
    );
    assert_eq!(r["ablation"]["discard_errors"], r["ablation"]["inputs"]);
}

#[test]
fn ablation_rejects_levels_outside_the_tree() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "t.json", &["--lengths", "2,2,2"]);
    assert_eq!(rfs(&["ablate", &f, "--level", "3"]).status.code(), Some(2));
    assert_eq!(rfs(&["ablate", &f, "--level", "0"]).status.code(), Some(2));
}

#[test]
fn verify_accepts_generated_instances() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(
        dir.path(),
        "t.json",
        &["--lengths", "2,2,2", "--g", "prf", "--seed", "9"],
    );
    let out = rfs(&["verify", &f]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn verify_prints_a_counterexample_for_a_corrupted_table() {
    let cfg = FSTreeConfig::new(vec![2, 2, 2], GFamily::And, 1);
    let good = FSTree::build(cfg.clone()).unwrap();
    let prefix = vec![bs("01"), bs("11")];
    let s = good.secret(2, &prefix).unwrap();
    let wrong = if s == bs("11") { bs("00") } else { bs("11") };
    let bad = FSTree::build_unchecked(cfg.with_secret(2, prefix, wrong)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.json");
    std::fs::write(&f, bad.to_json()).unwrap();
    let f = f.to_string_lossy();

    let out = rfs(&["verify", &f]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("FAIL tree promises"), "{stderr}");
    assert!(stderr.contains("prefix (01)"), "{stderr}");
    // loading for solving refuses the same file
    assert_eq!(rfs(&["solve", &f]).status.code(), Some(2));
}

#[test]
fn desk_suite_passes() {
    let out = rfs(&["verify", "--suite", "desk", "--seed", "2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(json(&out)["verdicts"].as_array().unwrap().len() > 40);
}

#[test]
fn translation_round_trips_through_aaronson_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(
        dir.path(),
        "t.json",
        &["--lengths", "2,2,2", "--g", "majority", "--seed", "4"],
    );
    let a = dir.path().join("a.json").to_string_lossy().into_owned();
    let b = dir.path().join("b.json").to_string_lossy().into_owned();

    let out = rfs(&[
        "translate",
        &f,
        "--to",
        "aaronson",
        "--x1",
        "01",
        "--out",
        &a,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let af: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(af["h"], 2);

    let out = rfs(&["translate", &a, "--to", "tree", "--out", &b]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let tree = FSTree::from_json(&std::fs::read_to_string(&b).unwrap()).unwrap();
    let orig = FSTree::from_json(&std::fs::read_to_string(&f).unwrap()).unwrap();
    let want = orig.eval_f(1, &[bs("01")]).unwrap();
    for x1 in tree.inputs() {
        assert_eq!(tree.eval_f(1, &[x1]).unwrap(), want);
    }
}

#[test]
fn translation_rejects_inexpressible_trees() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen(dir.path(), "t.json", &["--lengths", "2,3,2"]);
    let a = dir.path().join("a.json").to_string_lossy().into_owned();
    let out = rfs(&["translate", &f, "--to", "aaronson", "--out", &a]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!Path::new(&a).exists());
}
