use std::path::PathBuf;

use reas::circuit::ideal_unitary;
use reas::linalg::{identity, phase_free_distance};
use reas_bench::config::{ExperimentConfig, ScenarioId};
use reas_bench::scenarios::{fig2_circuit, run_scenario, trotter_circuit};

fn configs() -> Vec<(String, ExperimentConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), ExperimentConfig::load(&p).unwrap()))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn shipped_configs_load_and_cover_every_scenario() {
    let all = configs();
    for id in [
        ScenarioId::Fig2DepthScaling,
        ScenarioId::Fig3GammaScaling,
        ScenarioId::Fig4Spt,
        ScenarioId::AppendixD,
        ScenarioId::TrotterIsing,
    ] {
        assert!(all.iter().any(|(_, c)| c.scenario == id), "no config for {id}");
    }
    for (name, cfg) in &all {
        assert!(cfg.samples >= 2, "{name}");
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(&back, cfg, "{name}");
        assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn full_scale_restores_depth_and_samples() {
    let (_, fig3) = configs().into_iter().find(|(n, _)| n == "fig3.toml").unwrap();
    let full = fig3.clone().full_scale();
    assert_eq!(full.depth().unwrap(), 1000);
    assert_eq!(full.samples, 4000);
    assert_eq!(fig3.depth().unwrap(), 200);
}

#[test]
fn trotter_without_noise_has_zero_error() {
    let (_, mut cfg) = configs().into_iter().find(|(n, _)| n == "trotter.toml").unwrap();
    cfg.noise.epsilon = Some(0.0);
    cfg.samples = 2;
    cfg.sweep.steps = vec![1, 3];
    cfg.trotter.as_mut().unwrap().twirl_draws = 2;
    let out = run_scenario(&cfg).unwrap();
    assert!(!out.rows.is_empty());
    assert!(out.rows.iter().all(|r| r.value.abs() < 1e-12));
}

#[test]
fn compute_uncompute_circuits_are_the_identity() {
    let zz = [0.3, 0.5, 0.7, 0.2, 0.4, 0.6, 0.8];
    for steps in [1, 2, 4] {
        let c = trotter_circuit(8, steps, &zz, 0.1 * std::f64::consts::PI).unwrap();
        assert!(phase_free_distance(&ideal_unitary(&c).unwrap(), &identity(256)) < 1e-10);
    }
}

#[test]
fn fig2_circuit_has_one_gate_per_block() {
    let c = fig2_circuit(7);
    assert_eq!(c.blocks.len(), 21);
    assert!(c.blocks.iter().all(|b| b.gates().count() == 1));
}

#[test]
fn missing_noise_parameters_are_reported() {
    let (_, mut cfg) = configs().into_iter().find(|(n, _)| n == "fig2.toml").unwrap();
    cfg.noise.gamma = None;
    assert!(run_scenario(&cfg).is_err());
    let (_, mut cfg) = configs().into_iter().find(|(n, _)| n == "fig3.toml").unwrap();
    cfg.system.n_env = 5;
    assert!(run_scenario(&cfg).is_err());
}
