//! Trace distance of random two-qubit circuits against the noise strength.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use rand::Rng;
use reas::circuit::{ideal_unitary, Layer, LayeredCircuit, RotationGate};
use reas::dress::DressOptions;
use reas::linalg::{c64, DenseOperator};
use reas::noise::{EnvLayout, EnvNoiseSpec, NoiseModel, NoisePolicy};
use reas::rng::Seeder;
use reas::sim::{run_plain, sign_odd_env_component, trace_distance, trace_env, twirl_averaged_density, StateVector};

use super::par_map;
use crate::config::ExperimentConfig;
use crate::fit::fit_power_law;
use crate::output::{curve, find, Check, NamedFit, Row, ScenarioOutput, Summary};

pub const ANGLES: [f64; 6] = [PI / 2.0, PI / 4.0, PI / 8.0, -PI / 2.0, -PI / 4.0, -PI / 8.0];
const TWO: [&str; 9] = ["XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"];
const ONE: [(&str, usize); 6] = [("X", 0), ("Y", 0), ("Z", 0), ("X", 1), ("Y", 1), ("Z", 1)];

pub const REAS_MIN_SLOPE: f64 = 1.7;
pub const ORIGINAL_MAX_SLOPE: f64 = 1.2;

/// `depth` random rotations on two qubits, one per block. Axes are uniform
/// over the nine two-qubit Paulis, plus the six single-qubit ones when
/// `single` is set; angles are uniform over [`ANGLES`].
pub fn random_circuit<R: Rng + ?Sized>(depth: usize, single: bool, rng: &mut R) -> LayeredCircuit {
    let axes = if single { TWO.len() + ONE.len() } else { TWO.len() };
    let layers = (0..depth)
        .map(|_| {
            let a = rng.gen_range(0..axes);
            let theta = ANGLES[rng.gen_range(0..ANGLES.len())];
            let g = match a.checked_sub(TWO.len()) {
                None => RotationGate::on(2, TWO[a], &[0, 1], theta),
                Some(i) => RotationGate::on(2, ONE[i].0, &[ONE[i].1], theta),
            };
            Layer::new(vec![g.expect("valid random gate")])
        })
        .collect();
    LayeredCircuit::from_layers(2, layers)
}

/// Fresh projected noise after every gate and every inserted Pauli.
fn noise_at(layout: EnvLayout, gamma: f64) -> NoiseModel {
    NoiseModel::Env(EnvNoiseSpec { project_generator: true, ..EnvNoiseSpec::new(layout, gamma) })
}

#[derive(Clone, Copy)]
enum Arm {
    Original,
    Reas,
    ReasSpt,
}

impl Arm {
    fn label(self) -> &'static str {
        match self {
            Arm::Original => "original",
            Arm::Reas => "reas",
            Arm::ReasSpt => "reas+spt",
        }
    }
}

fn run_random(cfg: &ExperimentConfig, single: bool, arms: &[Arm]) -> Result<(Vec<Row>, Summary)> {
    let layout = EnvLayout::new(cfg.system.n_sys, cfg.system.n_env);
    let depth = cfg.depth()?;
    let gammas = &cfg.sweep.gammas;
    let root = Seeder::new(cfg.seed);
    let mut rho0 = DenseOperator::zeros(layout.dim(), layout.dim());
    rho0[(0, 0)] = c64(1.0, 0.0);
    let per_sample = par_map(cfg.samples, |s| {
        let seeder = root.child(s as u64);
        let c = random_circuit(depth, single, &mut seeder.child(0).rng());
        let noise_seeder = seeder.child(1);
        let mut ideal = StateVector::zero(EnvLayout::new(layout.n_sys, 0));
        ideal.apply_dense(&ideal_unitary(&c)?)?;
        let ideal = ideal.density();
        let mut rows = Vec::new();
        for &gamma in gammas {
            let noise = noise_at(layout, gamma);
            for &arm in arms {
                let reduced = match arm {
                    Arm::Original => {
                        run_plain(&c, &BTreeMap::new(), &noise, &StateVector::zero(layout), &noise_seeder)?
                            .reduced_system()
                    }
                    Arm::Reas | Arm::ReasSpt => {
                        let options = DressOptions { spt: matches!(arm, Arm::ReasSpt), virtual_final_frame: true };
                        let rho = twirl_averaged_density(&c, &BTreeMap::new(), options, &noise, &noise_seeder, &rho0)?;
                        trace_env(&rho, layout)
                    }
                };
                rows.push(Row::new("trace_distance", arm.label(), gamma, s, 0, trace_distance(&reduced, &ideal)?));
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<Row> = per_sample.into_iter().flatten().collect();
    let mut summary = Summary::new(cfg, cfg.scenario.name(), &rows);
    for &arm in arms {
        let pts = curve(&summary.aggregates, "trace_distance", arm.label(), |a| a.mean);
        let f = fit_power_law(&pts, None);
        summary.fits.push(NamedFit {
            method: arm.label().into(),
            quantity: "trace_distance".into(),
            statistic: "mean".into(),
            fit: f.as_ref().ok().cloned(),
            error: f.err().map(|e| e.to_string()),
        });
    }
    summary.meta("depth", depth);
    summary.meta("single_qubit_gates", single);
    summary.meta("noise_draws", cfg.samples);
    summary.meta("projected_generator", true);
    Ok((rows, summary))
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let (rows, mut summary) = run_random(cfg, false, &[Arm::Original, Arm::Reas])?;
    let slope = |m: &str| summary.fit(m).map(|f| f.exponent);
    let checks = vec![
        match slope("reas") {
            Some(e) => Check::new("reas-slope", e >= REAS_MIN_SLOPE, format!("{e:.4} >= {REAS_MIN_SLOPE}")),
            None => Check::new("reas-slope", false, "no fit".into()),
        },
        match slope("original") {
            Some(e) => Check::new("original-slope", e <= ORIGINAL_MAX_SLOPE, format!("{e:.4} <= {ORIGINAL_MAX_SLOPE}")),
            None => Check::new("original-slope", false, "no fit".into()),
        },
    ];
    summary.checks = checks;
    Ok(ScenarioOutput { rows, summary })
}

pub fn run_fig4(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let arms = [Arm::Original, Arm::Reas, Arm::ReasSpt];
    let (rows, mut summary) = run_random(cfg, true, &arms)?;
    let mut gammas = cfg.sweep.gammas.clone();
    gammas.sort_by(f64::total_cmp);
    let mut orderings = BTreeMap::new();
    for &g in &gammas {
        let mut means: Vec<(&str, f64)> = arms
            .iter()
            .filter_map(|a| find(&summary.aggregates, "trace_distance", a.label(), g).map(|x| (a.label(), x.mean)))
            .collect();
        means.sort_by(|a, b| a.1.total_cmp(&b.1));
        orderings.insert(format!("{g:e}"), means.iter().map(|m| m.0).collect::<Vec<_>>().join(" < "));
    }
    summary.meta("ordering_by_gamma", orderings);
    let g0 = gammas[0];
    let stat = |arm: Arm| find(&summary.aggregates, "trace_distance", arm.label(), g0).map(|a| (a.mean, a.std_err));
    let check = match (stat(Arm::ReasSpt), stat(Arm::Reas), stat(Arm::Original)) {
        (Some(spt), Some(reas), Some(orig)) => {
            let separated = |lo: (f64, f64), hi: (f64, f64)| lo.0 + lo.1 < hi.0 - hi.1;
            Check::new(
                "ordering-at-smallest-gamma",
                separated(spt, reas) && separated(reas, orig),
                format!(
                    "gamma {g0:e}: reas+spt {:.3e}±{:.1e}, reas {:.3e}±{:.1e}, original {:.3e}±{:.1e}",
                    spt.0, spt.1, reas.0, reas.1, orig.0, orig.1
                ),
            )
        }
        _ => Check::new("ordering-at-smallest-gamma", false, "missing arm".into()),
    };
    summary.checks.push(check);
    Ok(ScenarioOutput { rows, summary })
}

/// Ratio of the sign-odd `σ ⊗ M` error component at `gamma` and `gamma / 10`,
/// averaged over `draws` noise realisations, for a single-qubit gate with and
/// without the single Pauli transformation. Returns `(plain, spt)`.
pub fn spt_error_ratio(gamma: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
    let layout = EnvLayout::new(2, 2);
    let spec = |g: f64| EnvNoiseSpec {
        computational: NoisePolicy::PerGate,
        inserted: NoisePolicy::Off,
        ..EnvNoiseSpec::new(layout, g)
    };
    let gates = [
        RotationGate::on(2, "X", &[0], PI / 8.0)?,
        RotationGate::on(2, "Y", &[1], PI / 4.0)?,
        RotationGate::on(2, "Z", &[0], 3.0 * PI / 8.0)?,
    ];
    let root = Seeder::new(seed);
    let mut sums = [[0.0; 2]; 2];
    for d in 0..draws {
        let seeder = root.child(d as u64);
        for g in &gates {
            for (i, spt) in [false, true].into_iter().enumerate() {
                sums[i][0] += sign_odd_env_component(g, spt, &spec(gamma), &seeder)?;
                sums[i][1] += sign_odd_env_component(g, spt, &spec(gamma / 10.0), &seeder)?;
            }
        }
    }
    Ok((sums[0][0] / sums[0][1], sums[1][0] / sums[1][1]))
}
