use std::path::Path;
use std::process::{Command, Output};

use lloydlab::lattice::{Boundary, Lattice, LatticeSpec};
use lloydlab::resolvent::{eig_spectrum, SpectralProbe};
use lloydlab::lloyd::exact_trace;
use lloydlab::disorder::DisorderModel;

const BIN: &str = env!("CARGO_BIN_EXE_lloydlab");

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn malformed_json_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "{\n  \"lattice\": {\"d\": 1,\n", &["dos"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_field_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), r#"{"probe": {"epsilon": 0.1, "lamda": 1.0}}"#, &["dos"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dos_rejects_toymodel_disorder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 8, "bc": "periodic"}, "disorder": {"kind": "toymodel", "delta": 0.1}}"#;
    let out = run(dir.path(), cfg, &["dos"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decomposition_needs_two_sites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "restriction"}, "disorder": {"kind": "toymodel", "delta": 0.1}}"#;
    let out = run(dir.path(), cfg, &["decomposition"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_epsilon_monte_carlo_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "periodic"}, "probe": {"E": 0, "epsilon": 0.0}}"#;
    let out = run(dir.path(), cfg, &["trace"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn breached_threshold_exits_one() {
    // no estimate lands within a thousandth of a standard error at every point
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "periodic"}, "mc": {"samples": 200},
                 "tolerances": {"sigma": 0.001, "pass_fraction": 1.0}}"#;
    let out = run(dir.path(), cfg, &["dos"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_coupling_trace_matches_free_resolvent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 6, "bc": "periodic"},
                 "probe": {"E_grid": {"start": -1.0, "stop": 5.0, "points": 4}, "epsilon": 0.2, "lambda": 0.0},
                 "mc": {"samples": 50}}"#;
    let out = run(dir.path(), cfg, &["trace"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lat = Lattice::new(LatticeSpec::new(1, 6, Boundary::Periodic)).unwrap();
    // free spectrum 2 - 2cos(2πk/L)
    let free: Vec<f64> = (0..6).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 6.0).cos()).collect();
    for row in csv_rows(&read(dir.path(), "trace.csv")) {
        let z = num_complex::Complex64::new(row[0], 0.2);
        let oracle: num_complex::Complex64 = free.iter().map(|&e| 1.0 / (z - e)).sum();
        assert!((row[1] - oracle.re).abs() < 1e-12 && (row[2] - oracle.im).abs() < 1e-12);
        assert!((row[5] - oracle.re).abs() < 1e-12 && (row[6] - oracle.im).abs() < 1e-12);
        let exact = exact_trace(&lat, &DisorderModel::Iid, &SpectralProbe::new(row[0], 0.2, 0.0)).unwrap();
        assert!((exact - oracle).norm() < 1e-12);
    }
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 8, "bc": "periodic"},
                 "probe": {"E_grid": {"start": -1.0, "stop": 5.0, "points": 5}, "epsilon": 0.1},
                 "mc": {"samples": 4000, "seed": 9, "batch": 300}}"#;
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = run(dir.path(), cfg, &["--threads", threads, "dos"]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push((read(dir.path(), "dos.csv"), read(dir.path(), "dos.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "periodic"}, "mc": {"samples": 500, "seed": 1}}"#;
    run(dir.path(), cfg, &["dos"]);
    let a = read(dir.path(), "dos.csv");
    run(dir.path(), cfg, &["--seed", "2", "dos"]);
    let b = read(dir.path(), "dos.csv");
    assert_ne!(a, b);
    assert!(b.contains("\"seed\":2"));
}

#[test]
fn csv_header_records_version_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "restriction"}, "probe": {"lambda": 0.0}}"#;
    let out = run(dir.path(), cfg, &["spectrum"]);
    assert_eq!(out.status.code(), Some(0));
    let text = read(dir.path(), "spectrum.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# lloydlab {}", env!("CARGO_PKG_VERSION")));
    let config = lines.next().unwrap().strip_prefix("# config ").unwrap();
    let parsed: serde_json::Value = serde_json::from_str(config).unwrap();
    assert_eq!(parsed["lattice"]["L"], 4);
    let lat = Lattice::new(LatticeSpec::new(1, 4, Boundary::Restriction)).unwrap();
    let spec = eig_spectrum(&lat.laplacian());
    let got: Vec<f64> = csv_rows(&text).iter().map(|r| r[1]).collect();
    for (g, e) in got.iter().zip(&spec) {
        assert!((g - e).abs() < 1e-14);
    }
}

#[test]
fn json_format_writes_single_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"lattice": {"d": 1, "L": 4, "bc": "periodic"}, "mc": {"samples": 100},
                 "output": {"path": "run", "format": "json"}}"#;
    let out = run(dir.path(), cfg, &["dos"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("out/run.csv").exists());
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "run.json")).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_grassmann_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "{}", &["verify", "grassmann"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| !l.starts_with("FAIL")));
    assert!(dir.path().join("out/verify_grassmann.json").exists());
}
