//! Compute-uncompute transverse-field Ising circuits under coherent ZZ
//! miscalibration.

use std::collections::BTreeMap;

use anyhow::Result;
use rand::Rng;
use reas::circuit::{build_trotter_ising, compute_uncompute, LayeredCircuit};
use reas::dress::{dress, DressOptions};
use reas::noise::{CoherentNoiseSpec, EnvLayout, NoiseModel};
use reas::pauli::{Pauli1, PauliString};
use reas::rng::Seeder;
use reas::sim::{run_plain, run_shot, StateVector};

use super::par_map;
use crate::config::ExperimentConfig;
use crate::output::{Check, Row, ScenarioOutput, Summary};

/// Steps from which REAS must not be worse than the bare circuit.
pub const MIN_CHECKED_STEPS: usize = 4;
const ERROR_BASIS: [&str; 3] = ["ZZ", "ZI", "IZ"];

/// Per-bond ZZ angles drawn uniformly from `(0.1, 0.9)·π/2`.
pub fn zz_angles(n: usize, seeder: &Seeder) -> Vec<f64> {
    let mut rng = seeder.rng();
    (0..n - 1).map(|_| rng.gen_range(0.1..0.9) * std::f64::consts::FRAC_PI_2).collect()
}

pub fn trotter_circuit(n: usize, steps: usize, zz: &[f64], x_angle: f64) -> Result<LayeredCircuit> {
    Ok(compute_uncompute(&build_trotter_ising(n, steps, zz, x_angle)?))
}

fn z_errors(s: &StateVector, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|q| Ok(s.expectation(&PauliString::from_sparse(n, &[(q, Pauli1::Z)]))? - 1.0)).collect()
}

/// Mean over qubits of the per-qubit RMS of `⟨Z_q⟩ − 1`.
pub fn mean_qubit_rms(rows: &[Row], method: &str, steps: usize, n: usize) -> f64 {
    let mut sq = vec![(0.0, 0usize); n];
    for r in rows.iter().filter(|r| r.method == method && r.x == steps as f64) {
        sq[r.index].0 += r.value * r.value;
        sq[r.index].1 += 1;
    }
    sq.iter().map(|(s, c)| (s / (*c).max(1) as f64).sqrt()).sum::<f64>() / n as f64
}

pub fn run_trotter(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let n = cfg.system.n_sys;
    let t = cfg.trotter()?;
    let eps = cfg.epsilon()?;
    let root = Seeder::new(cfg.seed);
    let zz = zz_angles(n, &root.child(0xA));
    let circuits: Vec<(usize, LayeredCircuit)> =
        cfg.sweep.steps.iter().map(|&k| Ok((k, trotter_circuit(n, k, &zz, t.x_angle)?))).collect::<Result<_>>()?;
    let layout = EnvLayout::new(n, 0);
    let options = DressOptions { spt: false, virtual_final_frame: true };
    let per_draw = par_map(cfg.samples, |r| {
        let seeder = root.child(1).child(r as u64);
        let mut rows = Vec::new();
        for (steps, c) in &circuits {
            let spec = CoherentNoiseSpec::physical_draws(c.gates(), &ERROR_BASIS, &[2], eps, &seeder.child(0))?;
            let noise = NoiseModel::Coherent(spec);
            let x = *steps as f64;
            let plain = run_plain(c, &BTreeMap::new(), &noise, &StateVector::zero(layout), &seeder)?;
            for (q, e) in z_errors(&plain, n)?.into_iter().enumerate() {
                rows.push(Row::new("z_error", "original", x, r, q, e));
            }
            let dress_seeder = seeder.child(1).child(*steps as u64);
            for k in 0..t.twirl_draws {
                let d = dress(c, &mut dress_seeder.rng_at(k as u64)).with_options(options);
                let out = run_shot(&d, &noise, &StateVector::zero(layout), &seeder)?;
                for (q, e) in z_errors(&out, n)?.into_iter().enumerate() {
                    rows.push(Row::new("z_error", "reas", x, r * t.twirl_draws + k, q, e));
                }
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<Row> = per_draw.into_iter().flatten().collect();
    let mut summary = Summary::new(cfg, cfg.scenario.name(), &rows);
    let mut metric = BTreeMap::new();
    let mut worse = Vec::new();
    for &steps in &cfg.sweep.steps {
        let (o, r) = (mean_qubit_rms(&rows, "original", steps, n), mean_qubit_rms(&rows, "reas", steps, n));
        metric.insert(steps, (o, r));
        if steps >= MIN_CHECKED_STEPS && r > o {
            worse.push(steps);
        }
    }
    summary.checks.push(Check::new(
        "reas-not-worse",
        worse.is_empty(),
        if worse.is_empty() {
            format!("reas <= original for every step count >= {MIN_CHECKED_STEPS}")
        } else {
            format!("reas above original at steps {worse:?}")
        },
    ));
    summary
        .meta("mean_qubit_rms", metric.iter().map(|(k, (o, r))| (k.to_string(), [o, r])).collect::<BTreeMap<_, _>>());
    summary.meta("zz_angles", zz);
    summary.meta("epsilon", eps);
    summary.meta("twirl_draws", t.twirl_draws);
    summary.meta("noise_draws", cfg.samples);
    summary.meta("noise", "coherent error on ZZ gates in span{ZZ, ZI, IZ}, drawn per physical gate type");
    Ok(ScenarioOutput { rows, summary })
}
