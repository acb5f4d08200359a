use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fiocalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiocalc")).args(args).output().expect("binary runs")
}

fn cfg(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn check_linear_phase() {
    let o = fiocalc(&["check", "--spec", &cfg("phase_xxi.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["schema_version"], "1.0.0");
    assert_eq!(v["result"]["passed"], true);
    assert!(v["timing"]["wall_clock_s"].as_f64().is_some());
    assert!(v["seeds"]["run"].is_u64());
}

#[test]
fn failing_validation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(&spec, "kind = \"amplitude\"\nexpr = \"exp(y1)\"\norders = [0.0, 0.0, 0.0]\n").unwrap();
    let o = fiocalc(&["check", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["result"]["passed"], false);
}

#[test]
fn usage_errors_exit_2() {
    let o = fiocalc(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = fiocalc(&["check", "--spec", "/nonexistent/spec.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[grid]\npoints = \"many\"\n").unwrap();
    assert_eq!(fiocalc(&["opnorm", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn expand_writes_atomically_and_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = fiocalc(&["expand", "--config", &cfg("expand_tp.toml"), "--no-timing", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["result"]["kind"], "tp");
    assert_eq!(v["result"]["terms"].as_array().unwrap().len(), 4);
    assert!(v.get("timing").is_none());
    // Only the two artifacts remain: no temporary files left behind.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn expand_csv_has_metadata_and_rows() {
    let o = fiocalc(&["expand", "--config", &cfg("expand_tp.toml"), "--format", "csv", "--kind", "tp", "--order", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# schema_version=")));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "order,index,coefficient,coefficient_re,coefficient_im,body");
    assert_eq!(body.len(), 1 + 3);
}

#[test]
fn quantize_agrees_with_dense_assembly() {
    let o = fiocalc(&["quantize", "--config", &cfg("quantize_psido.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    for out in v["result"]["outputs"].as_array().unwrap() {
        assert!(out["dense_max_abs_diff"].as_f64().unwrap() < 1e-10);
    }
    assert_eq!(v["seeds"]["run"], 3);
}

#[test]
fn opnorm_sweep_is_stable() {
    let o = fiocalc(&["opnorm", "--config", &cfg("opnorm_sobolev.toml"), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let norms: Vec<f64> = r.records().map(|rec| rec.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(norms.len(), 3);
    assert!(norms[2] < 1.1 * norms[0]);
}

#[test]
fn smoothing_reports_ratios_and_residuals() {
    let o = fiocalc(&["smoothing", "--config", &cfg("smoothing_arctan.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["result"]["ratios"].as_array().unwrap().len(), 5);
    assert!(v["result"]["commutator_residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1e-8));
}

#[test]
fn oracle_flags_unresolved_plans() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("o.toml");
    let text = format!(
        "amplitude = \"{}\"\nsymbol = \"{}\"\n[plan]\nnodes = 64\n[oracle]\ntarget = \"c_tp\"\npoints = [[0.0, 0.0, 1.0]]\n",
        cfg("amplitude_bracket.toml"),
        cfg("symbol_bracket.toml")
    );
    std::fs::write(&p, text).unwrap();
    assert_eq!(fiocalc(&["oracle", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn schema_mismatch_warns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, "schema_version = \"0.1.0\"\nkind = \"phase\"\nexpr = \"x1*xi1\"\nprofile = \"l2\"\n").unwrap();
    let o = fiocalc(&["check", "--spec", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema version 0.1.0"));
}

#[test]
fn acceptance_subset() {
    let o = fiocalc(&["acceptance", "--suite", "primary", "--only", "2,3,11", "--no-timing"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["result"]["criteria"].as_array().unwrap().len(), 3);
    assert_eq!(String::from_utf8_lossy(&o.stderr).matches("PASS").count(), 3);
    assert_eq!(fiocalc(&["acceptance", "--suite", "other"]).status.code(), Some(2));
}

#[test]
fn thread_variable_is_checked() {
    let o = Command::new(env!("CARGO_BIN_EXE_fiocalc"))
        .args(["check", "--spec", &cfg("phase_xxi.toml")])
        .env("FIOCALC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_fiocalc"))
        .args(["check", "--spec", &cfg("phase_xxi.toml")])
        .env("FIOCALC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
