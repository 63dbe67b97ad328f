//! The `hallcond` binary: exit codes, diagnostics and artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hallcond"));
    c.env_remove("HALLCOND_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(experiment: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(experiment).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const ATOMIC: &str = r#"rng_seed = 4

[model]
kind = "atomic"

[lattice]
l1 = 20
l2 = 20
n_orb = 2

[experiment]
kind = "conductance"

[tolerances]
gap = 1e-3
"#;

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn atomic_conductance_passes_with_zero_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ATOMIC);
    let out = run("conductance", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.path().join("out/conductance.json"));
    assert_eq!(rep["pass"], true);
    assert!(rep["results"]["sigma"].as_f64().unwrap().abs() < 1e-12);
    // the resolved config is embedded with defaults filled in
    assert_eq!(rep["config"]["experiment"]["chern_grid"], 64);
    assert_eq!(rep["config"]["tolerances"]["quantization"], 1e-3);
    assert_eq!(rep["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("out/conductance_series.csv")).unwrap();
    assert!(csv.starts_with("radius,value,increment\n"));
    assert!(dir.path().join("out/conductance_series.svg").exists());
    assert!(dir.path().join("out/conductance.timing.json").exists());
}

#[test]
fn missing_gap_tolerance_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ATOMIC.replace("gap = 1e-3\n", "increment = 1e-6\n"));
    let out = run("conductance", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gap"), "{err}");
    assert!(err.contains("line"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_exits_2_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ATOMIC.replace("n_orb = 2\n", "n_orb = 2\nwidth = 3\n"));
    let out = run("conductance", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("width") && err.contains("line 10"), "{err}");
}

#[test]
fn torus_conductance_is_a_geometry_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &ATOMIC.replace("n_orb = 2\n", "n_orb = 2\nboundary = \"torus\"\n"));
    let out = run("conductance", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry"));
}

#[test]
fn experiment_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), ATOMIC);
    let out = run("bloch", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn broken_weight_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("weight", &configs().join("weight_broken.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&dir.path().join("weight.json"));
    let fourier = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "fourier").unwrap();
    assert_eq!(fourier["pass"], false);
    let good = run("weight", &configs().join("weight.toml"), &dir.path().join("good"), &[]);
    assert_eq!(good.status.code(), Some(0));
}

#[test]
fn broken_weight_fails_the_property_suite() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("cluster_verify.toml")).unwrap();
    let cfg = write_config(dir.path(), &text.replace("[experiment]", "[weight]\nscale = 2.0\n\n[experiment]"));
    let out = run("verify-algebra", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&dir.path().join("out/verify-algebra.json"));
    assert_eq!(rep["results"]["matrix"]["weight_function"], false);
    assert_eq!(rep["results"]["matrix"]["conditional_expectation"], true);
}

#[test]
fn identical_runs_write_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cluster_pump.toml");
    let out = dir.path().join("out");
    let read = |f: &str| std::fs::read_to_string(out.join(f)).unwrap();
    let a = run("pump", &cfg, &out, &["--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    let (ja, ca) = (read("pump.json"), read("adiabatic.csv"));
    // the output directory is part of the embedded config, so reuse it
    let b = run("pump", &cfg, &out, &["--seed", "9", "--threads", "2"]);
    assert_eq!(b.status.code(), Some(0));
    assert!(ja == read("pump.json"), "reports differ between identical runs");
    assert!(ca == read("adiabatic.csv"));
    assert_eq!(json(&out.join("pump.json"))["config"]["rng_seed"], 9);
    let c = run("pump", &cfg, &out, &["--seed", "10"]);
    assert_eq!(c.status.code(), Some(0));
    assert!(ja != read("pump.json"));
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["weight", "--config"])
        .arg(configs().join("weight.toml"))
        .arg("--out")
        .arg(dir.path())
        .env("HALLCOND_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("weight.timing.json"))["threads"], 3);
}

#[test]
fn scan_eps_writes_the_response_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("qwz_scan_eps.toml"))
        .unwrap()
        .replace("l1 = 32", "l1 = 16")
        .replace("l2 = 32", "l2 = 16")
        .replace("radius = 10", "radius = 4");
    let cfg = write_config(dir.path(), &text);
    let out = run("scan-eps", &cfg, &dir.path().join("out"), &[]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/scan_eps.csv")).unwrap();
    assert!(csv.starts_with("eps,delta_j,ratio,residual,first_order_residual\n"));
    assert_eq!(csv.lines().count(), 5);
    let rep = json(&dir.path().join("out/scan-eps.json"));
    assert!(rep["results"]["slope"].as_f64().unwrap().is_finite());
}
