use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_interplab")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .env("INTERPLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn report(dir: &Path, cmd: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{cmd}.json"))).unwrap()).unwrap()
}

#[test]
fn kfunc_l1_example_reports_two_at_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["kfunc"], &config("kfunc_l1.json"), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path(), "kfunc");
    assert!((r["results"]["k_at_1"].as_f64().unwrap() - 2.0).abs() <= 1e-4);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["config_sha256"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(tmp.path().join("kfunc.csv")).unwrap();
    assert!(csv.starts_with("t,k,lower_bound,x0_part_norm,x1_part_norm\n"));
    assert_eq!(csv.lines().count(), 62);
}

#[test]
fn interp_norm_scalar_example_is_sqrt_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["interp-norm"], &config("interp_norm_scalar.json"), tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let v = report(tmp.path(), "interp-norm")["results"]["value"].as_f64().unwrap();
    assert!((v - 2f64.sqrt()).abs() <= 1e-6);
}

#[test]
fn invalid_theta_exits_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"couple": {"x0": {"exponent": 2, "weights": [1]}, "x1": {"exponent": 2, "weights": [1]}},
            "params": {"theta": 1.5, "p0": 2, "p1": 2}, "x": [1]}"#,
    );
    let out = run(&["interp-norm"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.theta"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_field_and_missing_seed_are_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"space": {"exponent": 2, "weights": [1]}, "vectors": [[1]], "colour": 1}"#,
    );
    let out = run(&["rademacher"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let cfg = write_config(
        tmp.path(),
        r#"{"params": {"theta": 0.5, "p0": 1, "p1": 2}, "w0": [1, 2], "w1": [2, 1], "samples": 3}"#,
    );
    let out = run(&["weighted-demo"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = run(&["weighted-demo", "--seed", "4"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(tmp.path(), "weighted-demo")["seed"], 4);
}

#[test]
fn mismatched_command_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["mean-min"], &config("kfunc_l1.json"), tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("command"));
}

#[test]
fn failed_expectation_exits_one_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"couple": {"x0": {"exponent": 1, "weights": [1, 4]}, "x1": {"exponent": 1, "weights": [2, 1]}},
            "x": [1, 1], "expect": {"k_at_1": {"value": 3, "tol": 1e-4}}}"#,
    );
    let out = run(&["kfunc"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let r = report(&tmp.path().join("out"), "kfunc");
    assert_eq!(r["passed"], false);
    let failed: Vec<&str> = r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["passed"] == false)
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["expect.k_at_1"]);
}

#[test]
fn missing_config_and_unwritable_output_are_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["kfunc"], &tmp.path().join("absent.json"), tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run(&["kfunc"], &config("kfunc_l1.json"), &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(bin())
        .args(["kfunc", "--config"])
        .arg(config("kfunc_l1.json"))
        .arg("--out-dir")
        .arg(tmp.path())
        .env("INTERPLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rademacher_scalars_and_key_order_invariant_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["rademacher"],
        &config("rademacher_scalars.json"),
        &tmp.path().join("a"),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = report(&tmp.path().join("a"), "rademacher");
    assert_eq!(a["results"]["average"].as_f64(), Some(5.0));
    let text = fs::read_to_string(config("rademacher_scalars.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let obj = v.as_object().unwrap();
    let mut keys: Vec<&String> = obj.keys().collect();
    keys.reverse();
    let reordered = format!(
        "{{{}}}",
        keys.iter()
            .map(|k| format!("{:?}: {}", k, obj[*k]))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let cfg = write_config(tmp.path(), &reordered);
    run(&["rademacher"], &cfg, &tmp.path().join("b"));
    let b = report(&tmp.path().join("b"), "rademacher");
    assert_eq!(a["config_sha256"], b["config_sha256"]);
}

#[test]
fn stein_report_has_exactly_seven_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"seed": 2, "family": {"kind": "weighted", "w0": [1, 2], "w1": [3, 0.5]},
            "couple": {"x0": {"exponent": 1, "weights": [1, 2]}, "x1": {"exponent": 2, "weights": [3, 0.5]}},
            "params": {"theta": 0.5, "p0": 1, "p1": 2}, "samples": 5, "constant": 10}"#,
    );
    let out = run(&["stein-check"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("stein-check_report.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    let mut keys: Vec<&String> = r.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(
        keys,
        [
            "c_empirical",
            "m0_lower",
            "m0_upper",
            "m1_lower",
            "m1_upper",
            "samples",
            "violations"
        ]
    );
    assert!(interplab::SteinReport::from_json(&text).is_ok());
}
