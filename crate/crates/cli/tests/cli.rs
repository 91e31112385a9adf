use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn ssmobs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssmobs")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const COUNTEREXAMPLE: &str = r#"{
    "A": {"rows": 3, "cols": 3, "data": [1, 0, 0, 0, 1, 0, 0, 0, 1]},
    "B": {"rows": 3, "cols": 1, "data": [1, 1, 1]},
    "C": {"rows": 2, "cols": 3, "data": [1, 0, 1, 0, 1, 1]},
    "delta": 0.1,
    "scheme": "bilinear"
}"#;

const TWO_STATE: &str = r#"{
    "A": {"rows": 2, "cols": 2, "data": [[0, 0], [1, 0], [-2, 0], [-3, 0]]},
    "B": {"rows": 2, "cols": 1, "data": [0, 1]},
    "C": {"rows": 1, "cols": 2, "data": [1, 0]},
    "delta": 0.5,
    "scheme": "zoh"
}"#;

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "cx.json", COUNTEREXAMPLE);
    let out = ssmobs(&["check", &p], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_json(&out);
    assert_eq!(report["observable"], false);
    assert_eq!(report["rank"], 2);
    assert!(report["gram_logdet"].is_null());

    let p = write(dir.path(), "two.json", TWO_STATE);
    let out = ssmobs(&["check", &p, "--tol", "1e-10"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["observable"], true);

    let p = write(dir.path(), "bad.json", "{\"A\": ");
    let out = ssmobs(&["check", &p], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    let out = ssmobs(&["check", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn enforce_thm5_reaches_zero_and_is_observable() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssmobs(&["enforce", "thm5", "--n", "15", "--m", "10", "--seed", "2", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["reached_zero"], true);
    assert_eq!(summary["report"]["observable"], true);
    assert_eq!(summary["zero_implies_observable"], true);
    let run = dir.path().join("run");
    for f in ["trace.csv", "params.json", "report.json", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,loss,grad_norm\n"));
    assert!(trace.lines().last().unwrap().split(',').nth(1) == Some("0.0"));
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
    assert_eq!(manifest["config"]["loss"], "thm5");
}

#[test]
fn enforce_rejects_unknown_loss_and_bad_margins() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ssmobs(&["enforce", "thm9"], dir.path()).status.code(), Some(1));
    assert_eq!(ssmobs(&["--version"], dir.path()).status.code(), Some(0));
    let out = ssmobs(&["enforce", "hautus", "--margin", "0.1", "--margin", "0.2", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn enforce_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = ssmobs(&["enforce", "thm4", "--n", "6", "--m", "3", "--seed", "5", "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trace.csv", "params.json", "report.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn experiment_smoke_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let out = ssmobs(&["experiment", "kernel-distinct", "--n", "4", "--m", "2", "--trials", "1", "--out", "k"], dir.path());
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("k/kernel_distinct.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,sampler,mode,n,m,L,delta,distinct_pairs,seed"));
    assert_eq!(lines.count(), 2);

    let out = ssmobs(
        &["experiment", "rowspace-rank", "--n", "6", "--m", "3", "--trials", "4", "--L", "16", "--out", "r"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["full_rank_trials"], 4);
    let csv = std::fs::read_to_string(dir.path().join("r/rowspace_rank.csv")).unwrap();
    assert!(csv.starts_with("trial,sampler,mode,n,m,L,delta,rank,seed\n"));

    let out = ssmobs(&["experiment", "eig-trajectory", "--n", "5", "--L", "8", "--elements", "2", "--out", "e"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["points"], 2 * 7 * 2);

    let out = ssmobs(
        &["experiment", "psi-vs-power", "--n", "6", "--m", "3", "--trials", "2", "--L", "8", "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("p/psi_vs_power.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2 * 2);
}

#[test]
fn kernel_distinct_psi_beats_powers() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssmobs(
        &["experiment", "kernel-distinct", "--n", "10", "--m", "6", "--trials", "5", "--L", "16", "--out", "k"],
        dir.path(),
    );
    let s = stdout_json(&out);
    let psi = s["decaying/psi_median"].as_f64().unwrap();
    let pow = s["decaying/power_median"].as_f64().unwrap();
    let max = s["max_pairs"].as_f64().unwrap();
    assert!(psi >= 0.9 * max && pow <= 0.2 * max, "psi {psi} power {pow} of {max}");
}

#[test]
fn train_outputs_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssmobs(&["train", "coupled", "--steps", "0", "--out", "zero"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let trace = std::fs::read_to_string(dir.path().join("zero/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1);
    assert!(trace.starts_with("step,loss,dA_norm,dB_norm,stepA,stepB,gradQ_norm,gradU_norm"));

    let out = ssmobs(&["train", "coupled", "--steps", "300", "--out", "c"], dir.path());
    assert!(out.status.success());
    let s = stdout_json(&out);
    assert_eq!(s["robbins_monro"]["a_step"]["class"], "divergent_like");
    assert_eq!(s["robbins_monro"]["b_step"]["class"], "divergent_like");
    assert_eq!(s["robbins_monro"]["b_square"]["class"], "convergent_like");
    assert_eq!(s["b_satisfied"], true);
    let config: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/config.json")).unwrap()).unwrap();
    assert_eq!(config["n"], 6);
    assert_eq!(config["sel"].as_array().unwrap().len(), 3);

    let out = ssmobs(&["train", "vanilla", "--eigs", "linear", "--steps", "4", "--lr", "1e-4", "--out", "v"], dir.path());
    assert!(out.status.success());
    let s = stdout_json(&out);
    assert!(s["lipschitz_lower_bound"].as_f64().unwrap() > 1.0);
    assert_eq!(s["expansion_flagged"], true);

    let out = ssmobs(&["train", "vanilla", "--lr", "1e3", "--steps", "50", "--out", "d"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "cfg.json", r#"{"m": 2, "p": 3, "q": 0.6, "steps": 7, "seed": 4}"#);
    let out = ssmobs(&["train", "coupled", "--config", &p, "--out", "c"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["steps_run"], 7);
    let config: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/config.json")).unwrap()).unwrap();
    assert_eq!(config["n"], 6);
    assert_eq!(config["q"], 0.6);
    let p = write(dir.path(), "bad.json", r#"{"m": 2, "p": 3, "n": 5}"#);
    assert_eq!(ssmobs(&["train", "coupled", "--config", &p, "--out", "d"], dir.path()).status.code(), Some(1));
}
