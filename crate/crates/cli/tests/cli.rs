use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn confcause(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confcause")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const ROLES: &str = r#"{"o": {"role": "option", "kind": "discrete"},
 "m": {"role": "metric", "kind": "continuous"},
 "y": {"role": "objective", "kind": "continuous"}}"#;

/// Option with three levels, a metric and an objective; `coupled` makes
/// o -> m -> y a chain, otherwise all three are independent.
fn write_table(dir: &Path, coupled: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut csv = String::from("o,m,y\n");
    for i in 0..3000 {
        let o = (i % 3) as f64;
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let (m, y) = if coupled { (o + e1, 0.8 * (o + e1) + e2) } else { (e1, e2) };
        csv.push_str(&format!("{o},{m},{y}\n"));
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
    fs::write(dir.join("roles.json"), ROLES).unwrap();
}

#[test]
fn chain_learns_two_directed_edges() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), true);
    let out = confcause(dir.path(), &["learn", "--data", "data.csv", "--roles", "roles.json", "--out", "model"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = read_json(&dir.path().join("model/model.json"));
    let directed: Vec<(String, String)> = model["directed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_str().unwrap().to_string(), e[1].as_str().unwrap().to_string()))
        .collect();
    assert_eq!(directed, vec![("o".into(), "m".into()), ("m".into(), "y".into())]);
    assert!(model["bidirected"].as_array().unwrap().is_empty());
    assert!(dir.path().join("model/pag.json").exists());
    assert!(fs::read_to_string(dir.path().join("model/model.dot")).unwrap().contains("\"o\" -> \"m\""));
}

#[test]
fn top_k_one_keeps_a_single_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(confcause(p, &["synth", "--seed", "7", "--samples", "1500", "--out", "s"]).status.success());
    let base = ["--data", "s/data.csv", "--roles", "s/roles.json"];
    assert!(confcause(p, &[&["learn"][..], &base, &["--out", "m"]].concat()).status.success());
    let diag = |k: &str, out: &str| {
        let args = [&["diagnose"][..], &base, &["--model", "m/model.json", "--objective", "y0", "--top-k", k, "--out", out]].concat();
        let o = confcause(p, &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_json(&p.join(out).join("diagnosis.json"))
    };
    let all = diag("10", "d10");
    let one = diag("1", "d1");
    assert!(all["paths"].as_array().unwrap().len() > 1);
    assert_eq!(one["paths"].as_array().unwrap().len(), 1);
    assert_eq!(one["paths"][0], all["paths"][0]);
    assert_eq!(one["root_causes"].as_array().unwrap().len(), 1);
}

#[test]
fn out_of_range_flag_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), true);
    for (flag, value) in [("--alpha", "1.5"), ("--theta-ratio", "0"), ("--bins", "1")] {
        let out = confcause(dir.path(), &["learn", "--data", "data.csv", "--roles", "roles.json", flag, value, "--out", "m"]);
        assert_eq!(out.status.code(), Some(2));
        let err = stderr_json(&out);
        assert_eq!(err["error"], "input");
        assert!(err["key"].as_str().unwrap().starts_with(flag));
    }
    let out = confcause(dir.path(), &["bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "input");
}

#[test]
fn malformed_roles_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), true);
    fs::write(dir.path().join("roles.json"), r#"{"o": {"role": "knob", "kind": "discrete"}, "m": {"role": "metric", "kind": "continuous"}, "y": {"role": "objective", "kind": "continuous"}}"#).unwrap();
    let out = confcause(dir.path(), &["learn", "--data", "data.csv", "--roles", "roles.json", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "input");
    assert_eq!(err["key"], "o");
    assert!(!dir.path().join("m/model.json").exists());
}

#[test]
fn missing_input_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), true);
    let out = confcause(dir.path(), &["learn", "--data", "absent.csv", "--roles", "roles.json", "--out", "m"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "data");
}

#[test]
fn unrelated_objective_is_an_empty_result() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), false);
    assert!(confcause(dir.path(), &["learn", "--data", "data.csv", "--roles", "roles.json", "--out", "m"]).status.success());
    let out = confcause(
        dir.path(),
        &["diagnose", "--data", "data.csv", "--roles", "roles.json", "--model", "m/model.json", "--objective", "y", "--out", "d"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "empty_result");
}

#[test]
fn diagnosing_a_non_objective_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), true);
    assert!(confcause(dir.path(), &["learn", "--data", "data.csv", "--roles", "roles.json", "--out", "m"]).status.success());
    let out = confcause(
        dir.path(),
        &["diagnose", "--data", "data.csv", "--roles", "roles.json", "--model", "m/model.json", "--objective", "m", "--out", "d"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["key"], "m");
}

#[test]
fn eval_scores_a_diagnosis() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(confcause(p, &["synth", "--seed", "7", "--samples", "1500", "--out", "s"]).status.success());
    let base = ["--data", "s/data.csv", "--roles", "s/roles.json"];
    assert!(confcause(p, &[&["learn"][..], &base, &["--out", "m"]].concat()).status.success());
    let args = [&["diagnose"][..], &base, &["--model", "m/model.json", "--objective", "y1", "--method", "cbi", "--out", "d"]].concat();
    assert!(confcause(p, &args).status.success());
    let out = confcause(p, &["eval", "--diagnosis", "d/diagnosis.json", "--truth", "s/truth.json", "--roles", "s/roles.json", "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&p.join("e/eval.json"));
    let count = |k: &str| r[k].as_u64().unwrap();
    assert_eq!(count("tp") + count("fp") + count("tn") + count("fn"), 10);
    let (tp, fp) = (count("tp") as f64, count("fp") as f64);
    assert!((r["precision"].as_f64().unwrap() - tp / (tp + fp)).abs() < 1e-12);
}
