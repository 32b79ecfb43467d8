use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gfqi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfqi")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(cmd: &str, body: &str) -> (TempDir, Output) {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let output = gfqi(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
    (dir, output)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flow_constant_hamiltonian_moves_z_linearly() {
    let (dir, o) = run("flow", r#"{"dim":1,"hamiltonian":"-1","initial":{"q":[0.3],"p":[0.2],"z":0.5}}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    assert_eq!(header, ["t", "q1", "p1", "z", "g"]);
    for r in &rows {
        assert!((r[3] - (0.5 + r[0])).abs() <= 1e-12);
        assert_eq!(r[1], 0.3);
        assert_eq!(r[2], 0.2);
    }
}

#[test]
fn flow_linear_z_hamiltonian_has_exponent_minus_two_t() {
    let (dir, o) = run("flow", r#"{"dim":1,"hamiltonian":"2*z","initial":{"q":[0.0],"p":[1.0],"z":1.0}}"#);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("out/trajectory.csv"));
    assert!(rows.len() > 2);
    for r in &rows {
        assert!((r[4] + 2.0 * r[0]).abs() <= 1e-8, "t = {}, g = {}", r[0], r[4]);
    }
}

#[test]
fn malformed_expression_is_a_config_error_with_location() {
    let (_dir, o) = run("flow", r#"{"dim":1,"hamiltonian":"cos(q1 +","initial":{"q":[0.0],"p":[0.0]}}"#);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("at byte 8"), "{err}");
}

#[test]
fn config_errors_exit_two() {
    for body in [
        "not json",
        r#"{"dim":1,"hamiltonian":"cos(q1)","unknown":1}"#,
        r#"{"dim":1,"hamiltonian":"cos(q2)"}"#,
        r#"{"dim":1,"hamiltonian":"cos(q1)","partition":1}"#,
        r#"{"dim":1,"hamiltonian":"cos(q1)","cutoff":{"delta":0.6,"eps0":0.5}}"#,
    ] {
        let (_dir, o) = run("flow", body);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", stderr(&o));
    }
    let o = gfqi(&["flow", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_jobs_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"dim":1,"hamiltonian":"0","initial":{"q":[0.0],"p":[0.0]}}"#);
    let o = gfqi(&["flow", "--config", &cfg, "--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_three() {
    let (_dir, o) = run("flow", r#"{"dim":1,"hamiltonian":"exp(exp(exp(p1)))","initial":{"q":[0.0],"p":[3.0]}}"#);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

const SMALL: &str = r#""partition":8,"grid":{"min":-1,"max":1,"count":9},
  "sampling":{"gradient_points":2,"telescoping_points":20,"probe_rays":4,"conformal_points":5,
              "gauge_paths":2,"trajectories":2,"path_intervals":100}"#;

#[test]
fn genfun_check_passes_for_cos_and_zero() {
    for h in [r#""cos(q1)","compact_support":{"r0":10,"w":1}"#, r#""0""#] {
        let (dir, o) = run("genfun-check", &format!(r#"{{"dim":1,"hamiltonian":{h},{SMALL}}}"#));
        assert_eq!(o.status.code(), Some(0), "{h}: {}", stderr(&o));
        let report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("out/genfun_check.json")).unwrap()).unwrap();
        assert_eq!(report["passed"], true);
        assert_eq!(report["seed"], 7);
        assert_eq!(report["config"]["partition"], 8);
        for key in ["generation", "gradient", "telescoping", "qi_probe", "jacobian"] {
            assert!(report["results"].get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn impossible_tolerance_fails_with_named_check() {
    let body = format!(
        r#"{{"dim":1,"hamiltonian":"cos(q1)","compact_support":{{"r0":10,"w":1}},
            "tolerances":{{"generation":1e-20}},{SMALL}}}"#
    );
    let (dir, o) = run("genfun-check", &body);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("generation"));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/genfun_check.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["failed_checks"], serde_json::json!(["generation"]));
}

#[test]
fn validate_passes_and_names_all_checks() {
    let body = format!(r#"{{"dim":1,"hamiltonian":"p1^2/2 + cos(q1) + 0.5*z","compact_support":{{"r0":10,"w":1}},{SMALL}}}"#);
    let (dir, o) = run("validate", &body);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate.json")).unwrap()).unwrap();
    for key in ["conformal_identity", "gauge_identity", "carnot_residual", "first_variation", "action_vanishing"] {
        assert_eq!(report["results"][key]["passed"], true, "{key}");
    }
}

#[test]
fn front_writes_csv_and_spectrum() {
    let body = r#"{"dim":1,"hamiltonian":"cos(q1)","compact_support":{"r0":10,"w":1},
                   "grid":{"min":-4,"max":4,"count":81}}"#;
    let (dir, o) = run("front", body);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/front.csv"));
    assert_eq!(header, ["q1", "p1", "z"]);
    assert_eq!(rows.len(), 81);
    let spectrum: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap()).unwrap();
    let values: Vec<f64> = spectrum["results"]["spectrum"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
}

#[test]
fn output_dir_falls_back_to_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from_config");
    let body = format!(
        r#"{{"dim":1,"hamiltonian":"0","initial":{{"q":[0.0],"p":[0.0]}},"output":{{"dir":{:?}}}}}"#,
        out.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), &body);
    let o = gfqi(&["flow", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn reports_are_reproducible() {
    let body = format!(r#"{{"dim":1,"hamiltonian":"cos(q1) + 0.7*z","compact_support":{{"r0":10,"w":1}},{SMALL}}}"#);
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &body);
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = gfqi(&["validate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "3", "--jobs", jobs]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        reports.push(fs::read(out.join("validate.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
