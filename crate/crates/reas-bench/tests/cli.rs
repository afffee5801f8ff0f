use std::path::Path;
use std::process::{Command, Output};

use reas::circuit::{to_text, LayeredCircuit};
use reas_bench::scenarios::fig2_circuit;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reas-bench")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_FIG2: &str = r#"
scenario = "fig2-depth-scaling"
seed = 3
samples = 4
observable = "IZII"

[system]
n_sys = 2
n_env = 2

[noise]
gamma = 0.01
bias = 10.0

[sweep]
b_values = [1, 2, 5, 10, 20]
"#;

#[test]
fn run_writes_identical_outputs_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL_FIG2);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bench(&["run", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"]).status.success());
    assert!(bench(&["run", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]).status.success());
    let csv = |d: &Path| std::fs::read(d.join("fig2-depth-scaling.csv")).unwrap();
    assert_eq!(csv(&a), csv(&b));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("fig2-depth-scaling.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["version"].is_string());
    assert!(summary["metadata"]["noise_draws"].is_number());

    let seeded = dir.path().join("s");
    assert!(bench(&["run", &cfg, "--out", seeded.to_str().unwrap(), "--seed", "4"]).status.success());
    assert_ne!(csv(&a), csv(&seeded));
}

#[test]
fn fit_reads_columns_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (1..=6).map(|i| format!("reas,{i},{}\nother,{i},1\n", 3.0 * (i as f64).powi(2))).collect();
    let csv = write(dir.path(), "p.csv", &format!("method,x,value\n{rows}"));
    let out = bench(&["fit", &csv, "--x", "x", "--y", "value", "--filter", "method=reas"]);
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["exponent"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((fit["intercept"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-12);
    assert_eq!(bench(&["fit", &csv, "--x", "x", "--y", "missing"]).status.code(), Some(1));
}

#[test]
fn exit_codes_distinguish_input_errors_and_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &SMALL_FIG2.replace("samples = 4", "samples = 1"));
    assert_eq!(bench(&["run", &bad]).status.code(), Some(1));
    let unknown = write(dir.path(), "u.toml", &SMALL_FIG2.replace("fig2-depth-scaling", "fig9"));
    assert_eq!(bench(&["run", &unknown]).status.code(), Some(1));
    assert_eq!(bench(&["run", "/nonexistent/config.toml"]).status.code(), Some(1));

    // Two blocks are too few for the fit window, so the fits fail their checks.
    let short = write(dir.path(), "s.toml", &SMALL_FIG2.replace("[1, 2, 5, 10, 20]", "[1, 2]"));
    let out = dir.path().join("o");
    assert_eq!(bench(&["run", &short, "--out", out.to_str().unwrap(), "--check"]).status.code(), Some(3));
    assert_eq!(bench(&["run", &short, "--out", out.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn validate_accepts_circuit_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "c.txt", &to_text(&fig2_circuit(3)));
    let out = bench(&["validate", &good]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("blocks 9"));

    let mut overlap = LayeredCircuit::new(2);
    overlap.blocks = fig2_circuit(1).blocks;
    let text = to_text(&overlap).replacen("block 1\nlayer\n", "", 1);
    let bad = write(dir.path(), "o.txt", &text);
    assert_eq!(bench(&["validate", &bad]).status.code(), Some(1));
    let junk = write(dir.path(), "j.txt", "qubits 2\nfrobnicate\n");
    assert_eq!(bench(&["validate", &junk]).status.code(), Some(1));
}
