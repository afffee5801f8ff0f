//! Expectation-value error against the number of repeated blocks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use reas::calibration::{estimate_gate_shift, theory_shift, CalibrationConfig, CalibrationMode};
use reas::circuit::{ideal_unitary, GateKey, Layer, LayeredCircuit, RotationGate};
use reas::dress::{apply_corrections, dress, DressOptions};
use reas::noise::{EnvLayout, EnvNoiseSpec, NoiseModel, NoisePolicy};
use reas::rng::Seeder;
use reas::sim::{run_plain, run_shot, StateVector};

use super::par_map;
use crate::config::{CorrectionSource, ExperimentConfig};
use crate::fit::{fit_power_law, pre_saturation_window};
use crate::output::{curve, Check, NamedFit, Row, ScenarioOutput, Summary};

pub const EXPONENT_RANGE: (f64, f64) = (0.40, 0.60);
pub const UNDRESSED_MIN_EXPONENT: f64 = 0.85;

/// `ZY(π/8)`, `YZ(−π/8)`, `XY(−π/8)` on the two system qubits.
pub fn fig2_block() -> Vec<RotationGate> {
    [("ZY", PI / 8.0), ("YZ", -PI / 8.0), ("XY", -PI / 8.0)]
        .iter()
        .map(|(l, t)| RotationGate::on(2, l, &[0, 1], *t).expect("valid block gate"))
        .collect()
}

/// `b` copies of the block, one gate per twirl block.
pub fn fig2_circuit(b: usize) -> LayeredCircuit {
    let layers = (0..b).flat_map(|_| fig2_block().into_iter().map(|g| Layer::new(vec![g]))).collect();
    LayeredCircuit::from_layers(2, layers)
}

/// Noise fixed per physical gate type and biased towards each gate's own
/// generator; fresh noise after every inserted Pauli.
pub fn fig2_noise(cfg: &ExperimentConfig) -> Result<NoiseModel> {
    let layout = EnvLayout::new(cfg.system.n_sys, cfg.system.n_env);
    Ok(NoiseModel::Env(EnvNoiseSpec {
        computational: NoisePolicy::Fixed,
        inserted: NoisePolicy::PerGate,
        bias_factor: cfg.noise.bias,
        ..EnvNoiseSpec::new(layout, cfg.gamma()?)
    }))
}

pub(crate) fn calibration_config(cfg: &ExperimentConfig, mode: CalibrationMode) -> CalibrationConfig {
    CalibrationConfig {
        k_max: cfg.calibration.k_max,
        draws_per_k: cfg.calibration.draws_per_k,
        shots: cfg.calibration.shots,
        mode,
        ..CalibrationConfig::default()
    }
}

fn corrections(cfg: &ExperimentConfig, noise: &NoiseModel, seeder: &Seeder) -> Result<BTreeMap<GateKey, f64>> {
    let noise_seeder = seeder.child(0);
    let mut out = BTreeMap::new();
    for (i, g) in fig2_block().iter().enumerate() {
        let shift = match cfg.noise.correction {
            CorrectionSource::Theory => theory_shift(g, noise, &noise_seeder)?,
            CorrectionSource::Calibrated => {
                let cal = calibration_config(cfg, CalibrationMode::Twirled);
                estimate_gate_shift(g, noise, &cal, &noise_seeder, &seeder.child(2).child(i as u64))?.delta_theta
            }
            CorrectionSource::None => 0.0,
        };
        out.insert(g.key(), shift);
    }
    Ok(out)
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let noise = fig2_noise(cfg)?;
    let obs = cfg.system_observable()?;
    let layout = EnvLayout::new(cfg.system.n_sys, cfg.system.n_env);
    let b_values = &cfg.sweep.b_values;
    let ideals: Vec<f64> = b_values
        .iter()
        .map(|&b| {
            let mut s = StateVector::zero(EnvLayout::new(cfg.system.n_sys, 0));
            s.apply_dense(&ideal_unitary(&fig2_circuit(b))?)?;
            Ok(s.expectation(&obs)?)
        })
        .collect::<Result<_>>()?;
    let root = Seeder::new(cfg.seed);
    let options = DressOptions { spt: false, virtual_final_frame: true };
    let per_sample = par_map(cfg.samples, |s| {
        let seeder = root.child(s as u64);
        let noise_seeder = seeder.child(0);
        let shifts = corrections(cfg, &noise, &seeder)?;
        let mut rows: Vec<Row> = shifts
            .values()
            .enumerate()
            .map(|(i, v)| Row::new("angle_correction", "reas", i as f64, s, i, *v))
            .collect();
        let init = StateVector::zero(layout);
        for (&b, &ideal) in b_values.iter().zip(&ideals) {
            let c = fig2_circuit(b);
            let plain = run_plain(&c, &BTreeMap::new(), &noise, &init, &noise_seeder)?.expectation(&obs)?;
            let d = apply_corrections(&dress(&c, &mut seeder.child(1).rng_at(b as u64)), &shifts).with_options(options);
            let dressed = run_shot(&d, &noise, &init, &noise_seeder)?.expectation(&obs)?;
            rows.push(Row::new("expectation_error", "original", b as f64, s, 0, plain - ideal));
            rows.push(Row::new("expectation_error", "reas", b as f64, s, 0, dressed - ideal));
        }
        Ok(rows)
    })?;
    let rows: Vec<Row> = per_sample.into_iter().flatten().collect();
    let mut summary = Summary::new(cfg, cfg.scenario.name(), &rows);
    let fit = &cfg.fit;
    let reas_pts = curve(&summary.aggregates, "expectation_error", "reas", |a| a.rms);
    let plain_pts = curve(&summary.aggregates, "expectation_error", "original", |a| a.rms);
    let last = reas_pts.last().map_or(fit.min_x, |p| p.0);
    let reas_fit = fit_power_law(&reas_pts, Some((fit.min_x, last)));
    let window = pre_saturation_window(&plain_pts, fit.min_x, fit.knee_slope, fit.knee_level);
    let plain_fit = fit_power_law(&plain_pts, Some(window));
    summary.meta("observable", cfg.observable.clone());
    summary.meta("gamma", cfg.noise.gamma);
    summary.meta("bias", cfg.noise.bias);
    summary.meta("correction", cfg.noise.correction);
    summary.meta("noise_draws", cfg.samples);
    summary.meta("original_fit_window", window);
    for (method, result) in [("reas", &reas_fit), ("original", &plain_fit)] {
        summary.fits.push(NamedFit {
            method: method.into(),
            quantity: "expectation_error".into(),
            statistic: "rms".into(),
            fit: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
    }
    let (lo, hi) = EXPONENT_RANGE;
    summary.checks.push(match &reas_fit {
        Ok(f) => {
            Check::new("reas-exponent", (lo..=hi).contains(&f.exponent), format!("{:.4} in [{lo}, {hi}]", f.exponent))
        }
        Err(e) => Check::new("reas-exponent", false, e.to_string()),
    });
    summary.checks.push(match &plain_fit {
        Ok(f) => Check::new(
            "original-exponent",
            f.exponent >= UNDRESSED_MIN_EXPONENT,
            format!("{:.4} >= {UNDRESSED_MIN_EXPONENT} over {:?}", f.exponent, f.window),
        ),
        Err(e) => Check::new("original-exponent", false, e.to_string()),
    });
    Ok(ScenarioOutput { rows, summary })
}
