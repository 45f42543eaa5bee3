use std::path::Path;
use std::process::{Command, Output};

fn shapelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SQUARE: &str = r#"{
  "box": {"origin": [0, 0], "extent": [1, 1]},
  "nx": 32,
  "coefficients": {"kind": "identity"},
  "k": 1,
  "Lambda": 0
}"#;

const SMALL_DISK: &str = r#"{
  "box": {"origin": [0, 0], "extent": [1, 1]},
  "nx": 32,
  "coefficients": {"kind": "identity"},
  "k": 1,
  "Lambda": 500,
  "phi0": {"kind": "disk", "center": [0.5, 0.5], "radius": 0.3},
  "diagnostics": {"points": 4}
}"#;

#[test]
fn oracle_disk_prints_ball() {
    let out = shapelab(&["oracle", "--case", "disk", "--lambda", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["r_star"].as_f64().unwrap() - 0.2463).abs() < 1e-4);
    assert!((v["j_star"].as_f64().unwrap() - 190.6).abs() < 0.05);
    let out = shapelab(&["oracle", "--case", "square"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let out = shapelab(&["optimize", "--confg", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--confg"));
    assert_eq!(shapelab(&["frobnicate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", &SQUARE.replace("\"Lambda\": 0", "\"Lambda\": -1"));
    let out = shapelab(&["eigen", "--config", &bad, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Lambda"));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = shapelab(&["diagnose", "--run", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eigen_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "square.json", SQUARE);
    let out_dir = dir.path().join("out");
    let out = shapelab(&["eigen", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("eigen.json")).unwrap()).unwrap();
    let l1 = report["basis"]["lambdas"][0].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((l1 - exact).abs() / exact < 2e-2, "{l1}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    for f in ["config.json", "u.ssf", "eigen.json"] {
        assert_eq!(manifest["files"][f].as_str().unwrap().len(), 64);
    }

    let pgm = dir.path().join("u.pgm");
    let out = shapelab(&[
        "render",
        "--field",
        out_dir.join("u.ssf").to_str().unwrap(),
        "--out",
        pgm.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5 33 33 255\n"));
    assert_eq!(bytes.len(), b"P5 33 33 255\n".len() + 33 * 33);
}

#[test]
fn optimize_diagnose_audit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "disk.json", SMALL_DISK);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let out = shapelab(&["--threads", "2", "optimize", "--config", &cfg, "--out", run_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.json", "phi.ssf", "chi.ssf", "u.ssf", "report.json", "chi.pgm", "u1.pgm"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = shapelab(&["diagnose", "--run", run_s]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(run.join("diagnose.json")).unwrap();
    let out = shapelab(&["--threads", "1", "diagnose", "--run", run_s]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(first, std::fs::read(run.join("diagnose.json")).unwrap());
    let d: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(d["points"].as_array().unwrap().len(), 4);

    let out = shapelab(&["diagnose", "--run", run_s, "--point", "0.5,0.8"]);
    assert_eq!(out.status.code(), Some(0));
    let d: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("diagnose.json")).unwrap()).unwrap();
    assert_eq!(d["points"].as_array().unwrap().len(), 1);

    let out = shapelab(&["audit", "--run", run_s, "--trials", "12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    for f in ["report.json", "diagnose.json", "audit.json", "chi.ssf"] {
        assert!(manifest["files"][f].is_string(), "{f}");
    }
}
