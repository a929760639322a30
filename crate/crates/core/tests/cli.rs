use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_loewner-branch"))
}

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(path: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(path).arg("--out").arg(out).args(extra).output().unwrap()
}

const FELLER: &str = r#"{
  "field": {"kind": "levy_family", "breakpoints": [0.0], "segments": [{"a": 0.0, "b": 1.0}]},
  "commands": [{"command": "evolve", "points": [{"s": 0.0, "t": 1.0, "theta": 1.0}]}]
}"#;

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["run", "verify", "schema"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn schema_is_json() {
    let out = bin().arg("schema").output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.to_string().contains("generating_family"));
}

#[test]
fn feller_evolve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "feller.json", FELLER);
    let out = run(&path, &dir.path().join("out"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/0_evolve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "s,t,theta,re_v,im_v,abs_err_est");
    let v: f64 = lines.next().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((v - 0.5).abs() < 1e-8, "{v}");

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["success"], true);
    assert_eq!(report["rows"][0]["quantity"], "re_v");
}

#[test]
fn negative_mass_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let body = FELLER.replace(
        r#""b": 1.0}"#,
        r#""b": 1.0, "jumps": {"atoms": [{"location": 1.0, "mass": 0.5}, {"location": 2.0, "mass": -1.0}]}}"#,
    );
    let path = scenario(dir.path(), "bad.json", &body);
    let out = run(&path, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("field.segments[0].jumps.atoms[1].mass"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_file_exits_two() {
    let out = bin().args(["run", "/nonexistent/scenario.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = FELLER.replace(r#""commands""#, r#""solver": {"max_steps": 2}, "commands""#);
    let path = scenario(dir.path(), "stiff.json", &body);
    let out = run(&path, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["success"], false);
}

const SIMULATE: &str = r#"{
  "field": {"kind": "generating_family", "breakpoints": [0.0], "segments": [{"alpha": {"0": 1.0, "2": 1.0}}]},
  "commands": [
    {"command": "simulate", "s": 0.0, "t": 1.0, "x": 1, "paths": 2000, "seed": 5, "arguments": [0.5], "dump_paths": true}
  ]
}"#;

fn strip_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("generated_at_unix");
    v
}

#[test]
fn runs_are_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "sim.json", SIMULATE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&path, &a, &[]).status.success());
    assert!(run(&path, &b, &[]).status.success());
    for f in ["0_simulate.csv", "0_paths.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(strip_timestamp(&a.join("report.json")), strip_timestamp(&b.join("report.json")));

    let c = dir.path().join("c");
    assert!(run(&path, &c, &["--seed", "6"]).status.success());
    assert_ne!(fs::read(a.join("0_paths.csv")).unwrap(), fs::read(c.join("0_paths.csv")).unwrap());
}

#[test]
fn tolerance_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "feller.json", FELLER);
    let out = dir.path().join("out");
    assert!(run(&path, &out, &["--tol", "1e-6"]).status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["rtol"], 1e-6);
}

#[test]
fn verify_quick_passes() {
    let out = bin().args(["verify", "--quick"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("check,value,threshold,passed"));
}

#[test]
fn bundled_scenarios_run() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let out = run(&path, &dir.path().join(path.file_stem().unwrap()), &[]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}
