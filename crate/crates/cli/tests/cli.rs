use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poisson-bell"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("POISSON_BELL_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(dir: &Path, name: &str) -> Value {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    v["report"].clone()
}

#[test]
fn strip_kernel_has_mass_one_half() {
    let dir = TempDir::new().unwrap();
    let s = spec("strip.json");
    let o = run(dir.path(), &["kernel", "--spec", s.to_str().unwrap(), "--y", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    let meta = csv.lines().nth(1).unwrap();
    let mass: f64 = meta.split("mass=").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((mass - 0.5).abs() < 1e-10, "{meta}");
    assert!((report(dir.path(), "kernel.json")["mass"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn cauchy_kernel_is_bell_shaped() {
    let dir = TempDir::new().unwrap();
    let s = spec("cauchy.json");
    let o = run(dir.path(), &["kernel", "--spec", s.to_str().unwrap(), "--y", "1", "--bellshape", "6"]);
    assert_eq!(code(&o), 0);
    let shape = &report(dir.path(), "kernel.json")["shape"];
    assert_eq!(shape["status"]["status"], "pass");
    for row in shape["counts"].as_array().unwrap() {
        let counts: Vec<u64> = row.as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
        assert_eq!(counts, (0..=6).collect::<Vec<u64>>());
    }
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["kernel", "--spec", "/nonexistent/spec.json", "--y", "1"])), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"R": 1.0, "family": {"name": "strip", "params": {"a0": -1.0}}}"#).unwrap();
    assert_eq!(code(&run(dir.path(), &["kernel", "--spec", bad.to_str().unwrap(), "--y", "0.5"])), 2);
    let s = spec("strip.json");
    let s = s.to_str().unwrap();
    assert_eq!(code(&run(dir.path(), &["kernel", "--spec", s, "--y", "1.5"])), 2);
    assert_eq!(code(&run(dir.path(), &["verify-factorization", "--spec", s, "--split", "1.0"])), 2);
    assert_eq!(code(&run(dir.path(), &["simulate", "--spec", s, "--y0", "0.5", "--paths", "0"])), 2);
    assert_eq!(code(&run(dir.path(), &["closed-form", "--family", "cs", "--params", "y=1"])), 2);
}

#[test]
fn factorisation_of_a_table_spec() {
    let dir = TempDir::new().unwrap();
    let s = spec("table.json");
    let o = run(dir.path(), &["verify-factorization", "--spec", s.to_str().unwrap(), "--split", "0.5,1.2"]);
    assert_eq!(code(&o), 0);
    let r = report(dir.path(), "factorization.json");
    assert_eq!(r["pass"], true);
    for rep in r["reports"].as_array().unwrap() {
        assert!(rep["max_residual"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn verify_passes_and_detects_injected_faults() {
    let dir = TempDir::new().unwrap();
    for name in ["strip.json", "homogeneous.json"] {
        let s = spec(name);
        let o = run(dir.path(), &["verify", "--spec", s.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let s = spec("strip.json");
    let o = run(dir.path(), &["verify", "--spec", s.to_str().unwrap(), "--inject-fault"]);
    assert_eq!(code(&o), 4);
    let r = report(dir.path(), "verify.json");
    assert_eq!(r["pass"], false);
    assert_eq!(r["factorization"]["pass"], false);
    assert_eq!(r["bellshape"]["pass"], false);
}

#[test]
fn simulation_is_reproducible_and_matches_the_oracle() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let s = spec("strip.json");
    let args =
        ["simulate", "--spec", s.to_str().unwrap(), "--y0", "0.5", "--paths", "4000", "--dt", "1e-3", "--seed", "9"];
    assert_eq!(code(&run(a.path(), &args)), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_poisson-bell"))
        .arg("--out")
        .arg(b.path())
        .args(args)
        .env("POISSON_BELL_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for name in ["simulate.json", "samples.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let r = report(a.path(), "simulate.json");
    assert_eq!(r["pass"], true);
    assert_eq!(r["paths"], 4000);
    let csv = fs::read_to_string(a.path().join("samples.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "outcome,x,t");
    assert_eq!(csv.lines().count(), 4002);
}

#[test]
fn closed_form_cauchy_profile() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["closed-form", "--family", "homogeneous", "--params", "p=1,q=0,mu=1", "--points", "201"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("closed_form.csv")).unwrap();
    let centre = csv.lines().find(|l| l.starts_with("0,")).unwrap();
    let v: f64 = centre.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
}

#[test]
fn rogers_on_complex_rays() {
    let dir = TempDir::new().unwrap();
    let s = spec("homogeneous.json");
    let o = run(dir.path(), &["rogers", "--spec", s.to_str().unwrap(), "--angle", "1.0", "--xi-count", "20"]);
    assert_eq!(code(&o), 0);
    let r = report(dir.path(), "rogers.json");
    assert!(r["min_ratio"].as_f64().unwrap() >= 0.0);
    let csv = fs::read_to_string(dir.path().join("rogers.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 60);
}

#[test]
fn artifacts_reference_the_manifest_hash() {
    let dir = TempDir::new().unwrap();
    let s = spec("strip.json");
    assert_eq!(code(&run(dir.path(), &["verify-factorization", "--spec", s.to_str().unwrap(), "--split", "0.5"])), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest["manifest"]["command"], "verify-factorization");
    assert!(manifest["manifest"]["tolerances"]["residual"].is_number());
    let outputs = manifest["manifest"]["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for name in outputs {
        let text = fs::read_to_string(dir.path().join(name.as_str().unwrap())).unwrap();
        assert!(text.contains(hash), "{name}");
    }
}
