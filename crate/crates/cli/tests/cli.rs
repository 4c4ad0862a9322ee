use std::process::{Command, Output};

use serde_json::Value;

fn spinelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn lebesgue_potential_at_unit_height() {
    let out = spinelab(&["eval", "--preset", "lebesgue", "--x", "0", "--r", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,r,u,u_error"));
    let u: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!((u - (2f64.sqrt() - 1.0)).abs() < 1e-9, "{u}");
}

#[test]
fn classify_exponential_spine() {
    let out = spinelab(&["classify", "--profile", "exp:0.5", "--d", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "spinelab.classify");
    assert_eq!(v["version"], 1);
    assert_eq!(v["result"][0]["record"]["verdict"], "Irregular");
}

#[test]
fn classify_comparison_table() {
    let out = spinelab(&[
        "classify",
        "--profile",
        "power:2",
        "--profile",
        "exp:0.5",
        "--d",
        "3",
        "--format",
        "md",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains("| regular |"));
    assert!(text.contains("| irregular |"));
}

#[test]
fn scenario_run_with_parameter_flag() {
    let out = spinelab(&[
        "scenario",
        "run",
        "thm_2_1_d3",
        "--eps",
        "0.5",
        "--format",
        "json",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    let results = v["result"][0]["results"].as_array().unwrap();
    assert!(results
        .iter()
        .all(|r| r["outcome"] == "pass" || r["outcome"] == "skipped"));
    assert_eq!(v["result"][0]["params"]["eps"], 0.5);
}

#[test]
fn scenario_list_covers_catalog() {
    let out = spinelab(&["scenario", "list", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["result"].as_array().unwrap().len() >= 11);
}

#[test]
fn failing_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.toml");
    std::fs::write(
        &doc,
        r#"
[[scenario]]
name = "weak_operator"
description = "1/|x| under lambda = 0.5"
d = 3
domain = { c = 0.5, profile = { kind = "power", eta = 2.0 } }
operator = { type = "constant", lambda = 0.5 }

[[scenario.test]]
test = "superharmonic"
p = 1
annuli = [[0.05, 0.2]]
density = 6
expect = "holds"
provenance = "trivial"
claim = "deliberately wrong expectation"
"#,
    )
    .unwrap();
    let out = spinelab(&[
        "--config",
        doc.to_str().unwrap(),
        "scenario",
        "run",
        "--format",
        "csv",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("weak_operator,superharmonic,holds,fails,fail,trivial"),
        "{text}"
    );
}

#[test]
fn usage_and_config_errors_exit_three() {
    assert_eq!(spinelab(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(
        spinelab(&["eval", "--preset", "nope", "--x", "0", "--r", "1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        spinelab(&["scenario", "run", "thm_2_1_d3", "--bogus", "1"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        spinelab(&["scenario", "run", "thm_2_1_d3", "--eps", "2"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        spinelab(&["scenario", "run", "no_such_scenario"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        spinelab(&["--threads", "0", "scenario", "list"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(spinelab(&["--help"]).status.code(), Some(0));
}

#[test]
fn heavy_censoring_is_inconclusive() {
    let out = spinelab(&[
        "simulate",
        "--d",
        "3",
        "--profile",
        "power:12",
        "--start=-0.25,0,0",
        "--paths",
        "50",
        "--max-steps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert!(v["result"][0]["exit_time"]["error"]
        .as_str()
        .unwrap()
        .contains("censoring"));
}

#[test]
fn config_document_replaces_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("doc.toml");
    std::fs::write(
        &doc,
        r#"
[[scenario]]
name = "small"
description = "power spine for the Laplacian"
d = 3
params = { eta = 2.0 }
domain = { c = 0.5, profile = { kind = "power", eta = "eta" } }
operator = { type = "laplacian" }

[[scenario.test]]
test = "ito_mckean"
expect = "regular"
provenance = "trivial"
claim = "x^eta with eta > 1 is a regular tip"
"#,
    )
    .unwrap();
    let path = doc.to_str().unwrap();
    let out = spinelab(&["--config", path, "scenario", "run", "--format", "csv"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("small,ito_mckean,regular,regular,pass,trivial"));
    let out = spinelab(&["--config", path, "scenario", "run", "thm_2_1_d3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn out_dir_receives_samples_and_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinelab(&[
        "simulate",
        "--d",
        "3",
        "--profile",
        "power:12",
        "--start=-0.25,0,0",
        "--paths",
        "64",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 65);
    assert!(samples.starts_with("start,path,x1,x2,x3,exit_time,censored,class,steps\n"));
    let est: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("estimate.json")).unwrap())
            .unwrap();
    assert_eq!(est["config"]["sim"]["paths"], 64);
    assert!(est["result"][0]["exit_time"]["mean"].as_f64().unwrap() > 0.0);
}

/// Same bytes from repeated runs and from different thread counts.
fn assert_deterministic(args: &[&str]) {
    let run = |threads: &str| {
        let mut a = vec!["--threads", threads];
        a.extend_from_slice(args);
        let out = spinelab(&a);
        assert!(
            out.status.code().is_some_and(|c| c <= 2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let first = run("1");
    assert!(!first.is_empty());
    assert_eq!(first, run("1"), "{args:?} differs between runs");
    assert_eq!(first, run("3"), "{args:?} differs between thread counts");
}

#[test]
fn seeded_output_is_byte_identical() {
    assert_deterministic(&[
        "--seed",
        "7",
        "simulate",
        "--d",
        "3",
        "--profile",
        "exp:0.5",
        "--operator",
        "constant:2",
        "--start=0.05,0.05,0",
        "--start=-0.2,0,0.1",
        "--paths",
        "300",
        "--g",
        "tent:0.3",
        "--format",
        "csv",
    ]);
    assert_deterministic(&[
        "--seed",
        "7",
        "simulate",
        "--d",
        "3",
        "--profile",
        "power:12",
        "--start=-0.25,0,0",
        "--paths",
        "300",
    ]);
    assert_deterministic(&[
        "--seed",
        "3",
        "plotdata",
        "exit-histogram",
        "--d",
        "3",
        "--profile",
        "exp:0.5",
        "--start=0,0.1,0",
        "--paths",
        "300",
    ]);
    assert_deterministic(&[
        "scenario",
        "run",
        "lebesgue_spine",
        "thm_2_2_small_eps",
        "--format",
        "json",
    ]);
    assert_deterministic(&[
        "eval",
        "--preset",
        "t23_d3",
        "--x=-0.02:0.02:5",
        "--r",
        "0.01,0.02",
        "--quantity",
        "all",
    ]);
    assert_deterministic(&[
        "witness",
        "--scenario",
        "lebesgue_spine",
        "--format",
        "json",
    ]);
}
