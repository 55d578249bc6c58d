use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use serde_json::Value;

use vortexdyn::{snapshot, ComplexField2D, GridSpec};

const SCENARIO: &str = r#"{"family": "dipole", "x0": 1.2, "beta": 0.0, "t_end": 1.0,
    "snapshot_interval": 0.05, "engines": ["closed_form", "gpe_numeric"],
    "grid": {"extent": 8.0, "points_per_axis": 128}}"#;

fn vortexdyn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortexdyn"))
        .args(args)
        .current_dir(cwd)
        .env("VORTEXDYN_WORKERS", "2")
        .output()
        .unwrap()
}

fn error_manifest(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

#[test]
fn run_with_overrides_then_compare() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.json"), SCENARIO).unwrap();
    let out = vortexdyn(
        &["run", "s.json", "--out", "o", "--grid.points_per_axis", "64", "--set", "t_end=0.5", "--beta=0.25"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/bundle.json")).unwrap()).unwrap();
    assert_eq!(bundle["scenario"]["grid"]["points_per_axis"], 64);
    assert_eq!(bundle["scenario"]["t_end"], 0.5);
    assert_eq!(bundle["scenario"]["beta"], 0.25);

    let counts = fs::read_to_string(tmp.path().join("o/gpe_numeric/counts.csv")).unwrap();
    assert_eq!(counts.lines().next(), Some("t,N"));
    assert_eq!(counts.lines().count(), 12);

    let out = vortexdyn(&["compare", "o/closed_form", "o/gpe_numeric"], tmp.path());
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["mean_error"].as_f64().unwrap() < 0.1);
}

#[test]
fn errors_produce_a_manifest_and_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.json"), SCENARIO).unwrap();

    let m = error_manifest(&vortexdyn(&["run", "s.json", "--grid.points_per_axis", "63"], tmp.path()));
    assert_eq!(m["error"], "invalid_grid");
    assert!(m["message"].as_str().unwrap().contains("63"));

    let m = error_manifest(&vortexdyn(&["run", "missing.json"], tmp.path()));
    assert_eq!(m["error"], "io");

    let m = error_manifest(&vortexdyn(&["run", "s.json", "--family", "hexapole"], tmp.path()));
    assert_eq!(m["error"], "json");

    let m = error_manifest(&vortexdyn(&["sweep", "s.json", "--param", "beta=1:0:0.1"], tmp.path()));
    assert_eq!(m["error"], "invalid_parameter");
}

#[test]
fn detect_reads_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let g = GridSpec::new(8.0, 64).unwrap();
    let f = ComplexField2D::from_fn(g, 0.5, |x, y| Complex64::new(x - 1.0, -(y + 0.5)) * (-(x * x + y * y) / 2.0).exp());
    snapshot::write(&tmp.path().join("f.bin"), &f).unwrap();
    let out = vortexdyn(&["detect", "f.bin", "--beta", "0"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,y,charge,residual");
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cols[0], "0.5");
    assert_eq!(cols[3], "-1");
    assert!((cols[1].parse::<f64>().unwrap() - 1.0).abs() < 0.125);
    assert!((cols[2].parse::<f64>().unwrap() + 0.5).abs() < 0.125);
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("s.json"), SCENARIO).unwrap();
    let out = vortexdyn(
        &["sweep", "s.json", "--param", "x0=0.8,1.2", "--param", "beta=0:0.5:0.5", "--out", "sw", "--t_end", "0.1", "--grid.points_per_axis", "32"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for label in ["beta=0_x0=0.8", "beta=0_x0=1.2", "beta=0.5_x0=0.8", "beta=0.5_x0=1.2"] {
        assert!(tmp.path().join("sw").join(label).join("bundle.json").exists(), "{label}");
    }
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("beta,x0,engine,ok,mean_count,max_count"));
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
}
