//! Error models: coherent perturbations `I + iεC`, environment-coupled
//! Hamiltonian noise `e^{−iγH}` and single-qubit channels realised by a
//! system–environment unitary.
//!
//! Register layout: system qubits `0..n_sys` followed by environment qubits
//! `n_sys..n_sys+n_env`; system qubit `q` is paired with environment qubit `q`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::circuit::GateKey;
use crate::linalg::{
    c64, expm_hermitian, hermitian_eigenvalues, identity, kron, polar_unitary, DenseOperator, FULL_UNITARY_CAP,
};
use crate::pauli::{to_matrix, Pauli1, PauliAction, PauliError, PauliString, Sign};
use crate::rng::Seeder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("Hamiltonian has no terms")]
    EmptyTerms,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("perturbation I + iεC is singular")]
    Singular,
    #[error("channel strength {0} outside [0, 1]")]
    Strength(f64),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// System plus environment register with one-to-one pairing `S_q ↔ E_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvLayout {
    pub n_sys: usize,
    pub n_env: usize,
}

impl EnvLayout {
    pub fn new(n_sys: usize, n_env: usize) -> Self {
        EnvLayout { n_sys, n_env }
    }

    pub fn total(&self) -> usize {
        self.n_sys + self.n_env
    }

    pub fn dim(&self) -> usize {
        1 << self.total()
    }

    pub fn env_qubit(&self, q: usize) -> usize {
        self.n_sys + q
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n_sys.min(self.n_env)).map(|q| (q, self.env_qubit(q))).collect()
    }

    /// A system string padded with identities on the environment.
    pub fn lift(&self, sys: &PauliString) -> PauliString {
        let qubits: Vec<usize> = (0..sys.n()).collect();
        sys.embed(self.total(), &qubits)
    }
}

/// Real linear combination of phase-free Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    pub terms: Vec<(PauliString, f64)>,
}

impl PauliSum {
    pub fn n(&self) -> usize {
        self.terms.first().map_or(0, |(p, _)| p.n())
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        let key = p.phase_free();
        self.terms.iter().filter(|(q, _)| *q == key).map(|(_, c)| c).sum()
    }

    /// `sqrt(tr H†H)` for distinct terms.
    pub fn frobenius_norm(&self) -> f64 {
        let dim = (1u64 << self.n()) as f64;
        (dim * self.terms.iter().map(|(_, c)| c * c).sum::<f64>()).sqrt()
    }

    /// Upper bound on the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).sum()
    }

    pub fn scaled(&self, k: f64) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|(p, c)| (p.clone(), c * k)).collect() }
    }

    pub fn matrix(&self) -> Result<DenseOperator, PauliError> {
        let n = self.n();
        if n > FULL_UNITARY_CAP {
            return Err(PauliError::TooLarge(n, FULL_UNITARY_CAP));
        }
        let mut m = DenseOperator::zeros(1 << n, 1 << n);
        for (p, c) in &self.terms {
            m += to_matrix(p)? * c64(*c, 0.0);
        }
        Ok(m)
    }

    pub fn actions(&self) -> Vec<(PauliAction, f64)> {
        self.terms.iter().map(|(p, c)| (PauliAction::new(p), *c)).collect()
    }
}

/// `amps ← e^{−iγH} amps` by a Taylor series on the vector, split into steps
/// with `γ‖H‖ ≤ 1/2`.
pub fn apply_hamiltonian_exp(amps: &mut [Complex64], actions: &[(PauliAction, f64)], gamma: f64, l1: f64) {
    let steps = ((gamma.abs() * l1) / 0.5).ceil().max(1.0) as usize;
    let dt = gamma / steps as f64;
    let dim = amps.len();
    let mut term = vec![Complex64::new(0.0, 0.0); dim];
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for _ in 0..steps {
        term.copy_from_slice(amps);
        for k in 1..64 {
            next.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            let scale = c64(0.0, -dt / k as f64);
            for (a, c) in actions {
                a.accumulate(&term, &mut next, scale * *c);
            }
            std::mem::swap(&mut term, &mut next);
            let mut norm2 = 0.0;
            for (x, t) in amps.iter_mut().zip(&term) {
                *x += *t;
                norm2 += t.norm_sqr();
            }
            if norm2 < 1e-36 {
                break;
            }
        }
    }
}

/// Environment-coupled noise `e^{−iγH}` with `‖H‖_F = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvNoise {
    pub gamma: f64,
    pub hamiltonian: PauliSum,
    pub layout: EnvLayout,
}

impl EnvNoise {
    /// Normalises `terms` to unit Frobenius norm.
    pub fn from_terms(layout: EnvLayout, gamma: f64, terms: Vec<(PauliString, f64)>) -> Result<Self, NoiseError> {
        if terms.is_empty() {
            return Err(NoiseError::EmptyTerms);
        }
        for (p, _) in &terms {
            if p.n() != layout.total() {
                return Err(NoiseError::Dimension { expected: layout.total(), got: p.n() });
            }
        }
        let sum = PauliSum { terms };
        let norm = sum.frobenius_norm();
        if norm == 0.0 {
            return Err(NoiseError::EmptyTerms);
        }
        Ok(EnvNoise { gamma, hamiltonian: sum.scaled(1.0 / norm), layout })
    }

    pub fn matrix(&self) -> Result<DenseOperator, NoiseError> {
        Ok(self.hamiltonian.matrix()?)
    }

    /// Dense `e^{−iγH}`.
    pub fn unitary(&self) -> Result<DenseOperator, NoiseError> {
        Ok(expm_hermitian(&self.matrix()?, self.gamma))
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.hamiltonian.coefficient(p)
    }

    /// Removes `p` from `H` and renormalises.
    pub fn without(&self, p: &PauliString) -> Result<Self, NoiseError> {
        let key = p.phase_free();
        let terms = self.hamiltonian.terms.iter().filter(|(q, _)| *q != key).cloned().collect();
        EnvNoise::from_terms(self.layout, self.gamma, terms)
    }

    pub fn apply_to_state(&self, amps: &mut [Complex64]) -> Result<(), NoiseError> {
        if amps.len() != self.layout.dim() {
            return Err(NoiseError::Dimension { expected: self.layout.dim(), got: amps.len() });
        }
        apply_hamiltonian_exp(amps, &self.hamiltonian.actions(), self.gamma, self.hamiltonian.l1_norm());
        Ok(())
    }

    /// `e^{−iγH} · u`.
    pub fn apply_to_operator(&self, u: &DenseOperator) -> Result<DenseOperator, NoiseError> {
        if u.nrows() != self.layout.dim() {
            return Err(NoiseError::Dimension { expected: self.layout.dim(), got: u.nrows() });
        }
        Ok(self.unitary()? * u)
    }
}

/// The interaction basis: every non-identity single-qubit Pauli on every
/// qubit, plus all nine two-qubit Paulis on each `S_q E_q` pair.
pub fn interaction_terms(layout: EnvLayout) -> Vec<PauliString> {
    let n = layout.total();
    let mut out = Vec::new();
    for q in 0..n {
        for l in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
            out.push(PauliString::from_sparse(n, &[(q, l)]));
        }
    }
    for (s, e) in layout.pairs() {
        for a in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
            for b in [Pauli1::X, Pauli1::Y, Pauli1::Z] {
                out.push(PauliString::from_sparse(n, &[(s, a), (e, b)]));
            }
        }
    }
    out
}

/// Random `H = Σ cᵢPᵢ` over [`interaction_terms`], `cᵢ ~ N(0, 1)`.
/// A bias term is appended if missing and its coefficient multiplied by the factor.
pub fn random_interaction_hamiltonian<R: Rng + ?Sized>(
    layout: EnvLayout,
    gamma: f64,
    rng: &mut R,
    bias: Option<(&PauliString, f64)>,
) -> Result<EnvNoise, NoiseError> {
    let mut terms = interaction_terms(layout);
    let mut boost = None;
    if let Some((p, factor)) = bias {
        let key = p.phase_free();
        if key.n() != layout.total() {
            return Err(NoiseError::Dimension { expected: layout.total(), got: key.n() });
        }
        let idx = match terms.iter().position(|t| *t == key) {
            Some(i) => i,
            None => {
                terms.push(key);
                terms.len() - 1
            }
        };
        boost = Some((idx, factor));
    }
    let mut weighted: Vec<(PauliString, f64)> =
        terms.into_iter().map(|p| (p, rng.sample::<f64, _>(StandardNormal))).collect();
    if let Some((i, f)) = boost {
        weighted[i].1 *= f;
    }
    EnvNoise::from_terms(layout, gamma, weighted)
}

/// `I + iεC_s` with `C_s = Σ_w (ᾱ_w + sΔα_w) w`, on a gate's own qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentError {
    pub epsilon: f64,
    /// `(w, ᾱ_w, Δα_w)`.
    pub terms: Vec<(PauliString, Complex64, Complex64)>,
}

impl CoherentError {
    /// Pure over-rotation `C_s = s·σ`.
    pub fn overrotation(sigma: &PauliString, epsilon: f64) -> Self {
        CoherentError { epsilon, terms: vec![(sigma.phase_free(), c64(0.0, 0.0), c64(1.0, 0.0))] }
    }

    /// From two physical draws: `α(+1) = a_plus`, `α(−1) = a_minus`.
    pub fn from_sign_pair(epsilon: f64, basis: &[PauliString], a_plus: &[f64], a_minus: &[f64]) -> Self {
        let terms = basis
            .iter()
            .zip(a_plus.iter().zip(a_minus))
            .map(|(w, (p, m))| (w.clone(), c64((p + m) / 2.0, 0.0), c64((p - m) / 2.0, 0.0)))
            .collect();
        CoherentError { epsilon, terms }
    }

    pub fn alpha(&self, w: &PauliString, s: Sign) -> Complex64 {
        self.terms.iter().filter(|(q, _, _)| q == w).map(|(_, a, d)| a + d * s.value()).sum()
    }

    pub fn n(&self) -> usize {
        self.terms.first().map_or(0, |(p, _, _)| p.n())
    }

    pub fn c_matrix(&self, s: Sign) -> Result<DenseOperator, NoiseError> {
        let dim = 1 << self.n();
        let mut m = DenseOperator::zeros(dim, dim);
        for (w, a, d) in &self.terms {
            m += to_matrix(w)? * (a + d * s.value());
        }
        Ok(m)
    }

    /// Largest `‖C_s‖_op` over both signs.
    pub fn op_norm(&self) -> Result<f64, NoiseError> {
        let mut best: f64 = 0.0;
        for s in [Sign::Plus, Sign::Minus] {
            let c = self.c_matrix(s)?;
            let top = hermitian_eigenvalues(&(c.adjoint() * &c)).into_iter().fold(0.0, f64::max);
            best = best.max(top.max(0.0).sqrt());
        }
        Ok(best)
    }

    /// Rescales the coefficients so that `‖C_s‖_op ≤ 1` for both signs.
    pub fn normalized(&self) -> Result<Self, NoiseError> {
        let norm = self.op_norm()?;
        if norm <= 1.0 {
            return Ok(self.clone());
        }
        let k = c64(1.0 / norm, 0.0);
        let terms = self.terms.iter().map(|(w, a, d)| (w.clone(), a * k, d * k)).collect();
        Ok(CoherentError { epsilon: self.epsilon, terms })
    }

    /// Exact unitary nearest to `I + iεC_s`.
    pub fn perturbation(&self, s: Sign) -> Result<DenseOperator, NoiseError> {
        let c = self.c_matrix(s)?;
        let m = identity(c.nrows()) + c * c64(0.0, self.epsilon);
        polar_unitary(&m).ok_or(NoiseError::Singular)
    }

    /// First-order angle shift on the axis `σ` after twirling: `−tan⁻¹(εΔα_σ)`.
    pub fn twirled_shift(&self, sigma: &PauliString) -> f64 {
        let d: Complex64 = self.terms.iter().filter(|(w, _, _)| w == sigma).map(|(_, _, d)| *d).sum();
        -(self.epsilon * d.re).atan()
    }
}

/// `gate_unitary · exactify(I + iεC_s)`.
pub fn apply_coherent(gate_unitary: &DenseOperator, err: &CoherentError, s: Sign) -> Result<DenseOperator, NoiseError> {
    let dim = 1usize << err.n();
    if gate_unitary.nrows() != dim {
        return Err(NoiseError::Dimension { expected: dim, got: gate_unitary.nrows() });
    }
    if err.epsilon == 0.0 {
        return Ok(gate_unitary.clone());
    }
    Ok(gate_unitary * err.perturbation(s)?)
}

/// Channel families with an explicit system–environment dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Depolarizing,
    AmplitudeDamping,
    Dephasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub strength: f64,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, strength: f64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(NoiseError::Strength(strength));
        }
        Ok(ChannelSpec { kind, strength })
    }

    /// Interaction time of the dilation.
    pub fn delta_t(&self) -> f64 {
        let r = self.strength.sqrt().asin();
        match self.kind {
            ChannelKind::Depolarizing => r / 2.0,
            ChannelKind::AmplitudeDamping | ChannelKind::Dephasing => r,
        }
    }

    /// System–environment unitary (system qubit first) and the environment's
    /// initial state.
    pub fn env_unitary(&self) -> (DenseOperator, DenseOperator) {
        let dt = self.delta_t();
        let xx = pair_matrix("XX");
        let yy = pair_matrix("YY");
        let zz = pair_matrix("ZZ");
        let half = DenseOperator::identity(2, 2) * c64(0.5, 0.0);
        let ground = DenseOperator::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]));
        match self.kind {
            ChannelKind::Depolarizing => (expm_hermitian(&(xx + yy + zz), dt), half),
            ChannelKind::AmplitudeDamping => (expm_hermitian(&(xx + yy), dt / 2.0), ground),
            ChannelKind::Dephasing => (expm_hermitian(&zz, dt), half),
        }
    }

    /// Kraus operators of the channel.
    pub fn kraus(&self) -> Vec<DenseOperator> {
        let p = self.strength;
        let pauli = |s: &str| to_matrix(&s.parse::<PauliString>().unwrap()).unwrap();
        let scale = |m: DenseOperator, k: f64| m * c64(k, 0.0);
        match self.kind {
            ChannelKind::Depolarizing => vec![
                scale(identity(2), (1.0 - 3.0 * p / 4.0).sqrt()),
                scale(pauli("X"), (p / 4.0).sqrt()),
                scale(pauli("Y"), (p / 4.0).sqrt()),
                scale(pauli("Z"), (p / 4.0).sqrt()),
            ],
            ChannelKind::AmplitudeDamping => {
                let e0 = DenseOperator::from_row_slice(
                    2,
                    2,
                    &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64((1.0 - p).sqrt(), 0.0)],
                );
                let e1 = DenseOperator::from_row_slice(
                    2,
                    2,
                    &[c64(0.0, 0.0), c64(p.sqrt(), 0.0), c64(0.0, 0.0), c64(0.0, 0.0)],
                );
                vec![e0, e1]
            }
            ChannelKind::Dephasing => vec![scale(identity(2), (1.0 - p).sqrt()), scale(pauli("Z"), p.sqrt())],
        }
    }

    pub fn apply_kraus(&self, rho: &DenseOperator) -> DenseOperator {
        self.kraus().iter().fold(DenseOperator::zeros(2, 2), |acc, k| acc + k * rho * k.adjoint())
    }

    /// `Tr_E[U (ρ ⊗ ρ_E) U†]`.
    pub fn apply_dilation(&self, rho: &DenseOperator) -> DenseOperator {
        let (u, env) = self.env_unitary();
        let joint = &u * kron(rho, &env) * u.adjoint();
        let mut out = DenseOperator::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                out[(i, j)] = joint[(2 * i, 2 * j)] + joint[(2 * i + 1, 2 * j + 1)];
            }
        }
        out
    }
}

fn pair_matrix(s: &str) -> DenseOperator {
    to_matrix(&s.parse::<PauliString>().unwrap()).unwrap()
}

/// How a class of gates receives environment noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoisePolicy {
    Off,
    /// One Hamiltonian per physical gate type, shared by all its instances.
    Fixed,
    /// A fresh Hamiltonian per gate instance.
    PerGate,
}

/// Environment-noise model applied after every gate.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvNoiseSpec {
    pub layout: EnvLayout,
    pub gamma: f64,
    pub computational: NoisePolicy,
    pub inserted: NoisePolicy,
    /// Multiplies the coefficient of the gate's own generator.
    pub bias_factor: Option<f64>,
    /// Removes the gate's own generator from both sign branches, so the
    /// twirled first-order angle shift vanishes.
    pub project_generator: bool,
}

impl EnvNoiseSpec {
    pub fn new(layout: EnvLayout, gamma: f64) -> Self {
        EnvNoiseSpec {
            layout,
            gamma,
            computational: NoisePolicy::PerGate,
            inserted: NoisePolicy::PerGate,
            bias_factor: None,
            project_generator: false,
        }
    }

    /// Hamiltonian for a computational gate with full-register system
    /// generator `pauli` at physical angle `theta`.
    pub fn gate_noise(
        &self,
        pauli: &PauliString,
        theta: f64,
        sign: Sign,
        instance: u64,
        seeder: &Seeder,
    ) -> Result<Option<EnvNoise>, NoiseError> {
        let mut rng = match self.computational {
            NoisePolicy::Off => return Ok(None),
            NoisePolicy::Fixed => seeder.child(STREAM_FIXED).rng_at(GateKey::new(pauli, theta).label()),
            NoisePolicy::PerGate => seeder.child(STREAM_GATE).child(instance).rng_at(sign_label(sign)),
        };
        let lifted = self.layout.lift(pauli);
        let bias = self.bias_factor.map(|f| (&lifted, f));
        let h = random_interaction_hamiltonian(self.layout, self.gamma, &mut rng, bias)?;
        if self.project_generator {
            return Ok(Some(h.without(&lifted)?));
        }
        Ok(Some(h))
    }

    /// Hamiltonian after inserted gate number `index`.
    pub fn inserted_noise(&self, index: u64, seeder: &Seeder) -> Result<Option<EnvNoise>, NoiseError> {
        match self.inserted {
            NoisePolicy::Off => Ok(None),
            NoisePolicy::Fixed | NoisePolicy::PerGate => {
                let mut rng = seeder.child(STREAM_INSERTED).rng_at(index);
                random_interaction_hamiltonian(self.layout, self.gamma, &mut rng, None).map(Some)
            }
        }
    }
}

const STREAM_FIXED: u64 = 0xF1;
const STREAM_GATE: u64 = 0xF2;
const STREAM_INSERTED: u64 = 0xF3;

fn sign_label(s: Sign) -> u64 {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

/// Coherent errors keyed by nominal gate type, plus optional errors on
/// inserted Paulis keyed by their text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoherentNoiseSpec {
    pub gates: BTreeMap<GateKey, CoherentError>,
    pub inserted: BTreeMap<String, CoherentError>,
}

impl CoherentNoiseSpec {
    /// Draws `α_w ~ U(−1, 1)` for every physical gate type `(σ, θ)` and
    /// `(σ, π − θ)` and assembles the `ᾱ, Δα` pair for each nominal type.
    /// Only gates whose weight is in `weights` receive an error.
    pub fn physical_draws<'a>(
        gates: impl IntoIterator<Item = &'a crate::circuit::RotationGate>,
        basis: &[&str],
        weights: &[usize],
        epsilon: f64,
        seeder: &Seeder,
    ) -> Result<Self, NoiseError> {
        let mut out = CoherentNoiseSpec::default();
        for g in gates {
            if !weights.contains(&g.pauli().weight()) {
                continue;
            }
            let key = g.key();
            if out.gates.contains_key(&key) {
                continue;
            }
            let parsed: Vec<PauliString> = basis.iter().map(|b| b.parse()).collect::<Result<_, _>>()?;
            let local: Vec<PauliString> = parsed.into_iter().filter(|p| p.n() == g.qubits().len()).collect();
            if local.is_empty() {
                continue;
            }
            let draw = |theta: f64| -> Vec<f64> {
                let mut rng = seeder.rng_at(GateKey::new(g.pauli(), theta).label());
                local.iter().map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            let plus = draw(g.theta());
            let minus = draw(PI - g.theta());
            out.gates.insert(key, CoherentError::from_sign_pair(epsilon, &local, &plus, &minus));
        }
        Ok(out)
    }
}

/// Noise attached to a simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum NoiseModel {
    #[default]
    Noiseless,
    Env(EnvNoiseSpec),
    Coherent(CoherentNoiseSpec),
}
