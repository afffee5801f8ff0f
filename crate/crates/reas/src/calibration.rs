//! Angle-shift calibration by robust phase estimation.
//!
//! A gate type `e^{−iσθ}` is repeated `k` times with fresh correlated Paulis
//! between repetitions. The input is the `+1` eigenstate of a Pauli `τ`
//! anticommuting with `σ`, and the records are `⟨τ⟩ = cos kA` and
//! `⟨iτσ⟩ = sin kA` with `A = 2(θ + Δθ)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::circuit::{CircuitError, GateKey, Layer, LayeredCircuit, RotationGate};
use crate::dress::{dress, plain_physical_gates, DressError, DressOptions, DressedCircuit};
use crate::noise::{NoiseModel, NoisePolicy};
use crate::pauli::{commutation_sign, multiply, Pauli1, PauliError, PauliString, Sign};
use crate::rng::Seeder;
use crate::sim::{run_physical, Realizer, SimError, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("repetition count must be at least 1")]
    NoRepetitions,
    #[error("k_max must be a power of two, got {0}")]
    BadSchedule(u32),
    #[error("no probe anticommutes with {0}")]
    NoProbe(String),
    #[error("no first-order theory for this noise model")]
    NoTheory,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Dress(#[from] DressError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Output of robust phase estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimate {
    /// `Â ∈ (−π, π]`.
    pub angle_hat: f64,
    pub std_dev: f64,
    pub k_schedule: Vec<u32>,
    /// Shots or twirl draws per stage; `0` for exact probabilities.
    pub shots_per_k: usize,
    /// Set when a stage had no candidate inside the previous confidence window.
    pub flagged: bool,
}

/// Measured success probabilities at one repetition count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub p0: f64,
    pub p_plus: f64,
    /// Samples behind the probabilities; `0` for exact values.
    pub samples: usize,
}

/// Wraps into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Wraps into `(−π/2, π/2]`.
pub fn wrap_half(a: f64) -> f64 {
    wrap_angle(2.0 * a) / 2.0
}

/// `1, 2, 4, …, k_max`.
pub fn k_schedule(k_max: u32) -> Result<Vec<u32>, CalibrationError> {
    if k_max == 0 || !k_max.is_power_of_two() {
        return Err(CalibrationError::BadSchedule(k_max));
    }
    Ok((0..=k_max.trailing_zeros()).map(|j| 1 << j).collect())
}

/// Iterative refinement: each stage resolves `kA` modulo `2π` and keeps the
/// branch closest to the previous estimate.
pub fn rpe_estimate(
    mut experiment: impl FnMut(u32) -> Result<StageRecord, CalibrationError>,
    k_max: u32,
) -> Result<PhaseEstimate, CalibrationError> {
    let schedule = k_schedule(k_max)?;
    let mut estimate: Option<f64> = None;
    let mut flagged = false;
    let mut samples = 0;
    for &k in &schedule {
        let rec = experiment(k)?;
        samples = rec.samples;
        let ang = (2.0 * rec.p_plus - 1.0).atan2(2.0 * rec.p0 - 1.0);
        let kf = k as f64;
        estimate = Some(match estimate {
            None => ang / kf,
            Some(prev) => {
                let (best, dist) = (0..k)
                    .map(|m| (ang + 2.0 * PI * m as f64) / kf)
                    .map(|c| (c, wrap_angle(c - prev).abs()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("k ≥ 1 candidates");
                if dist > PI / (2.0 * kf) {
                    flagged = true;
                }
                best
            }
        });
    }
    let angle_hat = wrap_angle(estimate.expect("schedule is non-empty"));
    // A stage with N samples resolves kA to about 1/√N.
    let stage_std = if samples == 0 { f64::EPSILON } else { 1.0 / (samples as f64).sqrt() };
    Ok(PhaseEstimate {
        angle_hat,
        std_dev: (stage_std / k_max as f64).max(f64::MIN_POSITIVE),
        k_schedule: schedule,
        shots_per_k: samples,
        flagged,
    })
}

/// The layer repeated `k` times, one block per repetition, dressed with
/// fresh correlated Paulis.
pub fn build_calibration_circuit<R: Rng + ?Sized>(
    layer: &Layer,
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<DressedCircuit, CalibrationError> {
    let base = repeated(layer, n, k)?;
    Ok(dress(&base, rng))
}

fn repeated(layer: &Layer, n: usize, k: usize) -> Result<LayeredCircuit, CalibrationError> {
    if k == 0 {
        return Err(CalibrationError::NoRepetitions);
    }
    let c = LayeredCircuit::from_layers(n, vec![layer.clone(); k]).reblock(1);
    c.validate()?;
    Ok(c)
}

/// A Pauli anticommuting with `σ`: `X` on the first support qubit if it
/// carries `Y` or `Z`, else `Z`; the second support qubit if needed.
pub fn probe_for(sigma: &PauliString) -> Result<PauliString, CalibrationError> {
    for q in sigma.support() {
        let letter = match sigma.get(q) {
            Pauli1::Y | Pauli1::Z => Pauli1::X,
            _ => Pauli1::Z,
        };
        let tau = PauliString::from_sparse(sigma.n(), &[(q, letter)]);
        if commutation_sign(&tau, sigma)? == Sign::Minus {
            return Ok(tau);
        }
    }
    Err(CalibrationError::NoProbe(sigma.to_string()))
}

/// Probe state, `τ` and the Hermitian `iτσ`.
fn probe(
    sigma: &PauliString,
    layout: crate::noise::EnvLayout,
) -> Result<(StateVector, PauliString, PauliString), CalibrationError> {
    let tau = probe_for(sigma)?;
    let conj = multiply(&tau, sigma)?;
    let conj = conj.clone().with_phase((conj.phase() + 1) % 4);
    debug_assert!(conj.is_hermitian());
    // (I + τ)|0⟩ is a +1 eigenvector for a single-letter X or Z probe.
    let mut s = StateVector::zero(layout);
    let mut t = s.clone();
    t.apply_pauli(&layout.lift(&tau))?;
    for (a, b) in s.amps.iter_mut().zip(&t.amps) {
        *a += b;
    }
    let norm = s.norm();
    s.amps.iter_mut().for_each(|a| *a /= norm);
    Ok((s, tau, conj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// Correlated Pauli insertion between repetitions.
    Twirled,
    /// Same machinery without insertions.
    Naive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub k_max: u32,
    /// Twirl draws per stage.
    pub draws_per_k: usize,
    /// Measurement shots per draw; `None` uses exact probabilities.
    pub shots: Option<usize>,
    pub mode: CalibrationMode,
    pub options: DressOptions,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            k_max: 64,
            draws_per_k: 400,
            shots: None,
            mode: CalibrationMode::Twirled,
            options: DressOptions { spt: false, virtual_final_frame: true },
        }
    }
}

/// Result for one gate type.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftEstimate {
    pub key: GateKey,
    pub delta_theta: f64,
    pub phase: PhaseEstimate,
}

/// Probabilities at repetition count `k` for the isolated gate `g`.
/// `noise_seeder` fixes the noise realisation; `draw_seeder` the twirls and shots.
pub fn stage_probabilities(
    g: &RotationGate,
    noise: &NoiseModel,
    k: u32,
    cfg: &CalibrationConfig,
    noise_seeder: &Seeder,
    draw_seeder: &Seeder,
) -> Result<StageRecord, CalibrationError> {
    let n = g.pauli().n();
    let layer = Layer::new(vec![g.clone()]);
    let mut realizer = Realizer::new(noise, n, noise_seeder.clone())?;
    let layout = realizer.layout();
    let (init, tau, conj) = probe(g.pauli(), layout)?;
    let stage = draw_seeder.child(k as u64);
    let draws = match cfg.mode {
        CalibrationMode::Twirled => cfg.draws_per_k.max(1),
        CalibrationMode::Naive => 1,
    };
    let base = repeated(&layer, n, k as usize)?;
    let (mut e0, mut e1) = (0.0, 0.0);
    let mut hits = (0u64, 0u64);
    let mut total_shots = 0u64;
    for d in 0..draws {
        let mut rng = stage.rng_at(d as u64);
        let gates = match cfg.mode {
            CalibrationMode::Twirled => dress(&base, &mut rng).with_options(cfg.options).physical_gates()?,
            CalibrationMode::Naive => plain_physical_gates(&base, &BTreeMap::new())?,
        };
        let out = run_physical(&gates, &mut realizer, &init)?;
        let (x0, x1) = (out.expectation(&tau)?, out.expectation(&conj)?);
        match cfg.shots {
            None => {
                e0 += x0;
                e1 += x1;
            }
            Some(shots) => {
                let p = |x: f64| ((1.0 + x) / 2.0).clamp(0.0, 1.0);
                let shots = match cfg.mode {
                    CalibrationMode::Twirled => shots as u64,
                    CalibrationMode::Naive => (shots * cfg.draws_per_k.max(1)) as u64,
                };
                hits.0 += Binomial::new(shots, p(x0)).expect("valid probability").sample(&mut rng);
                hits.1 += Binomial::new(shots, p(x1)).expect("valid probability").sample(&mut rng);
                total_shots += shots;
            }
        }
    }
    Ok(match cfg.shots {
        None => StageRecord {
            p0: (1.0 + e0 / draws as f64) / 2.0,
            p_plus: (1.0 + e1 / draws as f64) / 2.0,
            samples: if draws > 1 { draws } else { 0 },
        },
        Some(_) => StageRecord {
            p0: hits.0 as f64 / total_shots as f64,
            p_plus: hits.1 as f64 / total_shots as f64,
            samples: total_shots as usize,
        },
    })
}

/// Calibrates one gate type in isolation. A flagged estimate is retried with
/// half the repetition depth.
pub fn estimate_gate_shift(
    g: &RotationGate,
    noise: &NoiseModel,
    cfg: &CalibrationConfig,
    noise_seeder: &Seeder,
    draw_seeder: &Seeder,
) -> Result<ShiftEstimate, CalibrationError> {
    let mut k_max = cfg.k_max;
    loop {
        let phase = rpe_estimate(|k| stage_probabilities(g, noise, k, cfg, noise_seeder, draw_seeder), k_max)?;
        if phase.flagged && k_max > 1 {
            log::warn!("phase tracking lost for {} at k_max = {k_max}; retrying", g.pauli());
            k_max /= 2;
            continue;
        }
        let phi = (phase.angle_hat / 2.0).rem_euclid(PI);
        return Ok(ShiftEstimate { key: g.key(), delta_theta: wrap_half(phi - g.theta()), phase });
    }
}

/// Calibrates every gate type of `layer`, each on its own.
pub fn estimate_shift(
    layer: &Layer,
    noise: &NoiseModel,
    cfg: &CalibrationConfig,
    noise_seeder: &Seeder,
    draw_seeder: &Seeder,
) -> Result<BTreeMap<GateKey, ShiftEstimate>, CalibrationError> {
    let mut out = BTreeMap::new();
    for (i, g) in layer.gates.iter().enumerate() {
        if out.contains_key(&g.key()) {
            continue;
        }
        let est = estimate_gate_shift(g, noise, cfg, noise_seeder, &draw_seeder.child(i as u64))?;
        out.insert(g.key(), est);
    }
    Ok(out)
}

/// First-order twirled shift predicted from the noise parameters.
///
/// For environment noise fixed per physical type this is `γ(h₊ − h₋)/2`,
/// with `h±` the coefficient of `σ ⊗ I` after the `±θ` physical gates; for a
/// coherent error it is `−tan⁻¹(εΔα_σ)`.
pub fn theory_shift(g: &RotationGate, noise: &NoiseModel, noise_seeder: &Seeder) -> Result<f64, CalibrationError> {
    match noise {
        NoiseModel::Noiseless => Ok(0.0),
        NoiseModel::Env(spec) => match spec.computational {
            NoisePolicy::Off => Ok(0.0),
            _ if spec.project_generator => Ok(0.0),
            NoisePolicy::Fixed => {
                let lifted = spec.layout.lift(g.pauli());
                let h = |s: Sign| -> Result<f64, CalibrationError> {
                    let noise = spec
                        .gate_noise(g.pauli(), s.value() * g.theta(), s, 0, noise_seeder)
                        .map_err(SimError::from)?
                        .expect("policy is not off");
                    Ok(noise.coefficient(&lifted))
                };
                Ok(spec.gamma * (h(Sign::Plus)? - h(Sign::Minus)?) / 2.0)
            }
            NoisePolicy::PerGate => Err(CalibrationError::NoTheory),
        },
        NoiseModel::Coherent(spec) => Ok(spec.gates.get(&g.key()).map_or(0.0, |e| e.twirled_shift(&g.local_pauli()))),
    }
}

/// One row of the emitted calibration table.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub pauli_text: String,
    pub theta_nominal: f64,
    pub delta_theta_hat: f64,
    pub std_dev: f64,
    pub k_max: u32,
    pub shots: usize,
}

impl From<&ShiftEstimate> for CalibrationRow {
    fn from(e: &ShiftEstimate) -> Self {
        CalibrationRow {
            pauli_text: e.key.pauli.clone(),
            theta_nominal: e.key.theta(),
            delta_theta_hat: e.delta_theta,
            std_dev: e.phase.std_dev,
            k_max: *e.phase.k_schedule.last().unwrap_or(&1),
            shots: e.phase.shots_per_k,
        }
    }
}

/// Shift table in the form taken by `apply_corrections`.
pub fn correction_table(estimates: &BTreeMap<GateKey, ShiftEstimate>) -> BTreeMap<GateKey, f64> {
    estimates.iter().map(|(k, e)| (k.clone(), e.delta_theta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::rotation_matrix;
    use crate::dress::PhysicalGate;
    use crate::linalg::{c64, phase_free_distance, DenseOperator};
    use crate::noise::{CoherentError, CoherentNoiseSpec, EnvLayout, EnvNoiseSpec};
    use crate::rng::substream;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn exact(a: f64) -> impl FnMut(u32) -> Result<StageRecord, CalibrationError> {
        move |k| {
            Ok(StageRecord {
                p0: (1.0 + (k as f64 * a).cos()) / 2.0,
                p_plus: (1.0 + (k as f64 * a).sin()) / 2.0,
                samples: 0,
            })
        }
    }

    #[test]
    fn rpe_is_exact_on_exact_probabilities() {
        let e = rpe_estimate(exact(0.0), 64).unwrap();
        assert_eq!(e.angle_hat, 0.0);
        assert!(e.std_dev > 0.0);
        assert!((rpe_estimate(exact(0.3), 64).unwrap().angle_hat - 0.3).abs() < 1e-9);
        let mut rng = substream(1, &[0]);
        for _ in 0..100 {
            let a = PI - rng.gen_range(0.0..2.0 * PI);
            let e = rpe_estimate(exact(a), 64).unwrap();
            assert!(wrap_angle(e.angle_hat - a).abs() < 1e-9, "{a} {}", e.angle_hat);
            assert!(!e.flagged);
            assert!(e.angle_hat > -PI && e.angle_hat <= PI);
        }
    }

    #[test]
    fn rpe_error_follows_the_heisenberg_trend() {
        let a = 0.3;
        let spread = |k_max: u32| {
            let mut sq = 0.0;
            for trial in 0..100 {
                let mut rng = substream(2, &[k_max as u64, trial]);
                let e = rpe_estimate(
                    |k| {
                        let p0 = (1.0 + (k as f64 * a).cos()) / 2.0;
                        let pp = (1.0 + (k as f64 * a).sin()) / 2.0;
                        let shots = 400;
                        let h0 = Binomial::new(shots, p0).unwrap().sample(&mut rng);
                        let hp = Binomial::new(shots, pp).unwrap().sample(&mut rng);
                        Ok(StageRecord { p0: h0 as f64 / shots as f64, p_plus: hp as f64 / shots as f64, samples: 400 })
                    },
                    k_max,
                )
                .unwrap();
                sq += wrap_angle(e.angle_hat - a).powi(2);
            }
            (sq / 100.0).sqrt()
        };
        let ratio = spread(64) / spread(8);
        assert!(ratio < 0.35, "{ratio}");
    }

    #[test]
    fn schedule_is_powers_of_two() {
        assert_eq!(k_schedule(8).unwrap(), vec![1, 2, 4, 8]);
        assert_eq!(k_schedule(6), Err(CalibrationError::BadSchedule(6)));
    }

    #[test]
    fn probes_anticommute() {
        for s in ["ZY", "YZ", "XY", "XI", "IX", "IZ", "ZZ", "XX"] {
            let sigma = p(s);
            let tau = probe_for(&sigma).unwrap();
            assert_eq!(commutation_sign(&tau, &sigma).unwrap(), Sign::Minus);
            let (state, tau, conj) = probe(&sigma, EnvLayout::new(2, 1)).unwrap();
            assert!((state.expectation(&tau).unwrap() - 1.0).abs() < 1e-14);
            assert!(state.expectation(&conj).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn single_repetition_is_a_single_dressed_layer() {
        let g = RotationGate::on(2, "ZY", &[0, 1], PI / 8.0).unwrap();
        let layer = Layer::new(vec![g.clone()]);
        let d = build_calibration_circuit(&layer, 2, 1, &mut substream(3, &[0])).unwrap();
        assert_eq!(d.block_count(), 1);
        assert_eq!(d.inserted.len(), 2);
        let k = 5;
        let d = build_calibration_circuit(&layer, 2, k, &mut substream(3, &[1])).unwrap();
        let want = rotation_matrix(&p("ZY"), k as f64 * PI / 8.0);
        assert!(phase_free_distance(&d.noiseless_unitary().unwrap(), &want) < 1e-12);
        assert_eq!(
            build_calibration_circuit(&layer, 2, 0, &mut substream(3, &[2])).unwrap_err(),
            CalibrationError::NoRepetitions
        );
    }

    fn overrotation_noise(g: &RotationGate, shift: f64) -> NoiseModel {
        // C_s = −sσ gives e^{−isσθ}e^{−isσ·atan ε}: a shift of +atan ε.
        let err = CoherentError { epsilon: shift.tan(), terms: vec![(g.local_pauli(), c64(0.0, 0.0), c64(-1.0, 0.0))] };
        let mut spec = CoherentNoiseSpec::default();
        spec.gates.insert(g.key(), err);
        NoiseModel::Coherent(spec)
    }

    fn noisy_unitary(gates: &[PhysicalGate], noise: &NoiseModel, n: usize) -> DenseOperator {
        let mut r = Realizer::new(noise, n, Seeder::new(0)).unwrap();
        let layout = r.layout();
        let mut u = DenseOperator::zeros(layout.dim(), layout.dim());
        for j in 0..layout.dim() {
            let out = run_physical(gates, &mut r, &StateVector::basis(layout, j)).unwrap();
            u.set_column(j, &nalgebra::DVector::from_vec(out.amps));
        }
        u
    }

    #[test]
    fn overrotation_accumulates_additively() {
        let g = RotationGate::on(2, "XZ", &[0, 1], 0.37).unwrap();
        let delta = 2e-3;
        let noise = overrotation_noise(&g, delta);
        let layer = Layer::new(vec![g.clone()]);
        for (k, seed) in [(1, 0), (7, 1), (64, 2)] {
            let d = build_calibration_circuit(&layer, 2, k, &mut substream(4, &[seed])).unwrap();
            let u = noisy_unitary(&d.physical_gates().unwrap(), &noise, 2);
            let want = rotation_matrix(&p("XZ"), k as f64 * (0.37 + delta));
            assert!(phase_free_distance(&u, &want) < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn zero_noise_gives_zero_shift() {
        let g = RotationGate::on(2, "YZ", &[0, 1], PI - PI / 8.0).unwrap();
        let cfg = CalibrationConfig { draws_per_k: 4, ..Default::default() };
        let est = estimate_gate_shift(&g, &NoiseModel::Noiseless, &cfg, &Seeder::new(0), &Seeder::new(1)).unwrap();
        assert!(est.delta_theta.abs() < 1e-12);
    }

    #[test]
    fn injected_overrotation_is_recovered() {
        let g = RotationGate::on(2, "ZY", &[0, 1], PI / 8.0).unwrap();
        let noise = overrotation_noise(&g, 5e-3);
        assert!((theory_shift(&g, &noise, &Seeder::new(0)).unwrap() - 5e-3).abs() < 1e-15);
        for mode in [CalibrationMode::Twirled, CalibrationMode::Naive] {
            let cfg = CalibrationConfig { draws_per_k: 8, mode, ..Default::default() };
            let est = estimate_gate_shift(&g, &noise, &cfg, &Seeder::new(0), &Seeder::new(1)).unwrap();
            assert!((est.delta_theta - 5e-3).abs() < 1e-4, "{mode:?}: {}", est.delta_theta);
        }
        let cfg = CalibrationConfig { draws_per_k: 8, shots: Some(400), ..Default::default() };
        let est = estimate_gate_shift(&g, &noise, &cfg, &Seeder::new(0), &Seeder::new(2)).unwrap();
        assert!((est.delta_theta - 5e-3).abs() < 1e-3, "{}", est.delta_theta);
    }

    #[test]
    fn biased_environment_shift_matches_theory() {
        let layout = EnvLayout::new(2, 2);
        let mut spec = EnvNoiseSpec::new(layout, 0.01);
        spec.computational = NoisePolicy::Fixed;
        spec.bias_factor = Some(10.0);
        let noise = NoiseModel::Env(spec);
        let g = RotationGate::on(2, "ZY", &[0, 1], PI / 8.0).unwrap();
        // First realisation with a shift well above the tolerance.
        let (seeder, theory) = (0..)
            .map(Seeder::new)
            .map(|s| {
                let t = theory_shift(&g, &noise, &s).unwrap();
                (s, t)
            })
            .find(|(_, t)| t.abs() > 5e-4)
            .unwrap();
        let cfg = CalibrationConfig { draws_per_k: 100, ..Default::default() };
        let est = estimate_gate_shift(&g, &noise, &cfg, &seeder, &Seeder::new(6)).unwrap();
        assert!((est.delta_theta - theory).abs() < 1e-4, "{} vs {theory}", est.delta_theta);
    }

    #[test]
    fn table_rows_carry_the_estimate() {
        let g = RotationGate::on(2, "ZY", &[0, 1], PI / 8.0).unwrap();
        let layer = Layer::new(vec![g.clone()]);
        let cfg = CalibrationConfig { draws_per_k: 2, k_max: 8, ..Default::default() };
        let map =
            estimate_shift(&layer, &overrotation_noise(&g, 1e-3), &cfg, &Seeder::new(0), &Seeder::new(1)).unwrap();
        let row = CalibrationRow::from(&map[&g.key()]);
        assert_eq!(row.pauli_text, "ZY");
        assert_eq!(row.k_max, 8);
        assert!((row.delta_theta_hat - 1e-3).abs() < 1e-9);
        assert!((correction_table(&map)[&g.key()] - row.delta_theta_hat).abs() == 0.0);
    }
}
