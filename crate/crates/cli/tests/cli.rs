//! End-to-end tests of the binary: exit-code contract, determinism of the
//! machine report, and catalog listing.

use std::io::Write;
use std::process::{Command, Output};

fn codim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codim"))
        .args(args)
        .env_remove("CODIM_TOL_SCALE")
        .output()
        .expect("binary runs")
}

fn temp_scenario(content: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    file.write_all(content.as_bytes()).unwrap();
    file
}

#[test]
fn bundled_scenarios_match_expectations() {
    for name in [
        "sphere_circle_in_s3",
        "cp1_circle_in_cp2",
        "cp2_frenet_counterexample",
        "cp2_counterexample_in_s4",
        "euclidean_erbacher",
    ] {
        let out = codim(&["run", name]);
        assert!(
            out.status.code() == Some(0),
            "{name}: status {:?}, stderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("verdict: OK"), "{name} output: {text}");
    }
}

#[test]
fn malformed_scenario_exits_with_usage_code() {
    let file = temp_scenario("name = \"broken\"\n[space\nkind = 3");
    let out = codim(&["run", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "stderr: {err}");
}

#[test]
fn unknown_scenario_name_exits_with_usage_code() {
    let out = codim(&["run", "no_such_scenario"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bundled scenarios"), "stderr: {err}");
}

#[test]
fn unknown_check_kind_lists_alternatives() {
    let file = temp_scenario(
        r#"
name = "bad_check"
[space]
kind = "euclidean"
dim = 3
[immersion]
coords = ["u1", "0", "0"]
domain = [[0.0, 1.0]]
[bundle]
frame = [["0", "1", "0"]]
[[checks]]
kind = "totally_bogus"
"#,
    );
    let out = codim(&["run", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("known kinds"), "stderr: {err}");
}

#[test]
fn expectation_mismatch_exits_one() {
    // a passing check declared as expected-fail must flip the exit code
    let file = temp_scenario(
        r#"
name = "mismatch"
[space]
kind = "sphere"
dim = 3
radius = 1.0
[immersion]
catalog = "latitude_circle"
param_dim = 1
domain = [[0.0, 6.283185307179586]]
[immersion.params]
phi = 0.7853981633974483
[bundle]
catalog = "meridian"
[[checks]]
kind = "first_normal_contained"
expected = "fail"
"#,
    );
    let out = codim(&["run", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("MISMATCH"), "stdout: {text}");
}

#[test]
fn machine_reports_are_deterministic_up_to_runtime() {
    let mut values = Vec::new();
    for _ in 0..2 {
        let out = codim(&["run", "sphere_circle_in_s3", "--json", "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0));
        let mut v: serde_json::Value =
            serde_json::from_slice(&out.stdout).expect("valid machine report");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["seed"], 7);
        assert!(v["runtime_ms"].is_u64());
        v.as_object_mut().unwrap().remove("runtime_ms");
        values.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(values[0], values[1]);
}

#[test]
fn machine_report_schema_fields() {
    let out = codim(&["run", "euclidean_erbacher", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "ok");
    assert_eq!(v["scenario"]["name"], "euclidean_erbacher");
    let checks = v["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        for field in ["name", "residual", "tol", "pass", "expected", "location"] {
            assert!(!c[field].is_null(), "missing field {field}");
        }
    }
}

#[test]
fn report_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = codim(&["run", "euclidean_erbacher", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"], "ok");
}

#[test]
fn tol_scale_flag_and_env_can_flip_checks() {
    // an absurdly small tolerance scale turns numerical-noise passes into
    // failures, which the expectation then mismatches
    let out = codim(&["run", "euclidean_erbacher", "--tol-scale", "1e-20"]);
    assert_eq!(out.status.code(), Some(1));
    // and via the environment variable
    let out = Command::new(env!("CARGO_BIN_EXE_codim"))
        .args(["run", "euclidean_erbacher"])
        .env("CODIM_TOL_SCALE", "1e-20")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // invalid env value is a usage error
    let out = Command::new(env!("CARGO_BIN_EXE_codim"))
        .args(["run", "euclidean_erbacher"])
        .env("CODIM_TOL_SCALE", "banana")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn catalog_lists_bundled_content() {
    let out = codim(&["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "sphere_circle_in_s3",
        "cp2_frenet_counterexample",
        "euclidean_erbacher",
        "latitude_circle",
        "mean_curvature_span",
    ] {
        assert!(text.contains(name), "catalog missing {name}");
    }

    let out = codim(&["catalog", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["scenarios"].as_array().unwrap().len() >= 5);

    // filtered listing keeps matches only
    let out = codim(&["catalog", "--filter", "erbacher"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("euclidean_erbacher"));
    assert!(!text.contains("sphere_circle_in_s3"));

    // empty filter gives the full listing
    let out = codim(&["catalog", "--filter", ""]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sphere_circle_in_s3"));
}

#[test]
fn expression_scenario_runs() {
    // great circle in the 2-sphere via coordinate expressions, with the
    // in-sphere normal as an expression frame
    let file = temp_scenario(
        r#"
name = "expression_equator"
[space]
kind = "sphere"
dim = 2
radius = 1.0
[immersion]
coords = ["cos(u)", "sin(u)", "0"]
param_dim = 1
domain = [[0.0, 6.283185307179586]]
[bundle]
frame = [["0", "0", "1"]]
[[checks]]
kind = "first_normal_contained"
[[checks]]
kind = "parallel_subbundle"
[[checks]]
kind = "curvature_invariant"
"#,
    );
    let out = codim(&["run", file.path().to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
