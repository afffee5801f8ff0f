//! Dense state-vector simulation of system ⊗ environment registers, plus
//! the metric kit.
//!
//! Gates act through local kernels on the amplitude vector. Qubit `0` is
//! the most significant bit of the basis index, so system amplitudes occupy
//! the high bits and environment amplitudes the low bits.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{GateKey, LayeredCircuit};
use crate::dress::{
    block_rotations, gate_offsets, plain_physical_gates, DressError, DressOptions, DressedCircuit, PhysicalGate,
    PhysicalRotation,
};
use crate::linalg::{c64, hermitian_eigenvalues, is_unitary, DenseOperator, FULL_UNITARY_CAP, STATE_VECTOR_CAP};
use crate::noise::{apply_coherent, EnvLayout, EnvNoise, NoiseError, NoiseModel, NoisePolicy};
use crate::pauli::{all_strings, PauliAction, PauliError, PauliString, Sign};
use crate::rng::Seeder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0} qubits exceed the simulation cap of {1}")]
    TooLarge(usize, usize),
    #[error("state norm drifted to {0}")]
    NormDrift(f64),
    #[error("observable {0} acts on environment qubits")]
    EnvObservable(String),
    #[error("operator is not unitary")]
    NonUnitary,
    #[error("empty sample set")]
    Empty,
    #[error("probabilities sum to {0}")]
    Probability(f64),
    #[error("exact twirl averaging needs Pauli-independent insertion noise")]
    InsertedCoherent,
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Dress(#[from] DressError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

const NORM_TOL: f64 = 1e-8;

/// A pure state of the full register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: Vec<Complex64>,
    pub layout: EnvLayout,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(layout: EnvLayout) -> Self {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: EnvLayout, index: usize) -> Self {
        let mut amps = vec![c64(0.0, 0.0); layout.dim()];
        amps[index] = c64(1.0, 0.0);
        StateVector { amps, layout }
    }

    pub fn from_amps(layout: EnvLayout, amps: Vec<Complex64>) -> Result<Self, SimError> {
        if amps.len() != layout.dim() {
            return Err(SimError::Dimension { expected: layout.dim(), got: amps.len() });
        }
        let s = StateVector { amps, layout };
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::NormDrift(norm));
        }
        Ok(s)
    }

    /// System state `sys` (length `2^n_sys`) tensored with `|0…0⟩` on the environment.
    pub fn with_system(layout: EnvLayout, sys: &[Complex64]) -> Result<Self, SimError> {
        if sys.len() != 1 << layout.n_sys {
            return Err(SimError::Dimension { expected: 1 << layout.n_sys, got: sys.len() });
        }
        let mut amps = vec![c64(0.0, 0.0); layout.dim()];
        for (i, a) in sys.iter().enumerate() {
            amps[i << layout.n_env] = *a;
        }
        Self::from_amps(layout, amps)
    }

    /// `|+⟩^{⊗n_sys} ⊗ |0…0⟩`.
    pub fn plus(layout: EnvLayout) -> Self {
        let dim = 1usize << layout.n_sys;
        let a = c64(1.0 / (dim as f64).sqrt(), 0.0);
        Self::with_system(layout, &vec![a; dim]).expect("uniform superposition is normalised")
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_full(&self, p: &PauliString) -> Result<(), SimError> {
        if p.n() != self.layout.total() {
            return Err(SimError::Dimension { expected: self.layout.total(), got: p.n() });
        }
        Ok(())
    }

    /// Applies a full-register Pauli string, phase included.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), SimError> {
        self.check_full(p)?;
        PauliAction::new(p).apply(&mut self.amps);
        Ok(())
    }

    /// `e^{−iσθ}` for a full-register Hermitian `σ`.
    pub fn apply_rotation(&mut self, p: &PauliString, theta: f64) -> Result<(), SimError> {
        self.check_full(p)?;
        PauliAction::new(p).rotate(&mut self.amps, theta);
        Ok(())
    }

    /// Applies a `2^k × 2^k` matrix to `qubits`; `qubits[0]` is the most
    /// significant bit of the local index.
    pub fn apply_local(&mut self, u: &DenseOperator, qubits: &[usize]) -> Result<(), SimError> {
        let k = qubits.len();
        if u.nrows() != 1 << k || u.ncols() != 1 << k {
            return Err(SimError::Dimension { expected: 1 << k, got: u.nrows() });
        }
        let n = self.layout.total();
        if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
            return Err(SimError::Dimension { expected: n, got: q + 1 });
        }
        apply_local_kernel(&mut self.amps, n, u, qubits);
        Ok(())
    }

    /// Applies a full-register matrix.
    pub fn apply_dense(&mut self, u: &DenseOperator) -> Result<(), SimError> {
        if u.nrows() != self.amps.len() {
            return Err(SimError::Dimension { expected: self.amps.len(), got: u.nrows() });
        }
        let mut out = vec![c64(0.0, 0.0); self.amps.len()];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, a) in self.amps.iter().enumerate() {
                *o += u[(i, j)] * a;
            }
        }
        self.amps = out;
        Ok(())
    }

    pub fn apply_env_noise(&mut self, noise: &EnvNoise) -> Result<(), SimError> {
        Ok(noise.apply_to_state(&mut self.amps)?)
    }

    /// `⟨ψ|(obs ⊗ I_env)|ψ⟩` for a system observable.
    pub fn expectation(&self, obs: &PauliString) -> Result<f64, SimError> {
        if obs.n() != self.layout.n_sys {
            if obs.n() == self.layout.total() && obs.support().iter().any(|&q| q >= self.layout.n_sys) {
                return Err(SimError::EnvObservable(obs.to_string()));
            }
            return Err(SimError::Dimension { expected: self.layout.n_sys, got: obs.n() });
        }
        let act = PauliAction::new(&self.layout.lift(obs));
        let mut v = c64(0.0, 0.0);
        for (b, a) in self.amps.iter().enumerate() {
            v += self.amps[b ^ act.x_mask].conj() * act.coeff(b) * a;
        }
        Ok(v.re)
    }

    /// `Tr_env |ψ⟩⟨ψ|`.
    pub fn reduced_system(&self) -> DenseOperator {
        let ds = 1usize << self.layout.n_sys;
        let de = 1usize << self.layout.n_env;
        DenseOperator::from_fn(ds, ds, |i, j| {
            (0..de).map(|e| self.amps[i * de + e] * self.amps[j * de + e].conj()).sum()
        })
    }

    /// `|ψ⟩⟨ψ|` on the full register.
    pub fn density(&self) -> DenseOperator {
        let d = self.amps.len();
        DenseOperator::from_fn(d, d, |i, j| self.amps[i] * self.amps[j].conj())
    }
}

fn apply_local_kernel(amps: &mut [Complex64], n: usize, u: &DenseOperator, qubits: &[usize]) {
    let k = qubits.len();
    let bits: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let mask: usize = bits.iter().sum();
    let offsets: Vec<usize> =
        (0..1usize << k).map(|l| (0..k).filter(|&j| l >> (k - 1 - j) & 1 == 1).map(|j| bits[j]).sum()).collect();
    let mut buf = vec![c64(0.0, 0.0); 1 << k];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (l, off) in offsets.iter().enumerate() {
            buf[l] = amps[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let mut acc = c64(0.0, 0.0);
            for (c, b) in buf.iter().enumerate() {
                acc += u[(r, c)] * b;
            }
            amps[base + off] = acc;
        }
    }
}

/// One step of an executed, noise-realised circuit.
#[derive(Debug, Clone)]
pub enum RealizedOp {
    Pauli(PauliAction),
    Rotation { action: PauliAction, theta: f64 },
    Local { matrix: Arc<DenseOperator>, qubits: Vec<usize> },
    Dense(Arc<DenseOperator>),
    Hamiltonian(Arc<EnvNoise>),
}

impl RealizedOp {
    pub fn apply(&self, s: &mut StateVector) -> Result<(), SimError> {
        match self {
            RealizedOp::Pauli(a) => a.apply(&mut s.amps),
            RealizedOp::Rotation { action, theta } => action.rotate(&mut s.amps, *theta),
            RealizedOp::Local { matrix, qubits } => s.apply_local(matrix, qubits)?,
            RealizedOp::Dense(u) => s.apply_dense(u)?,
            RealizedOp::Hamiltonian(h) => s.apply_env_noise(h)?,
        }
        Ok(())
    }
}

/// Turns physical gates into concrete operations for one noise realisation.
///
/// All randomness comes from `seeder`; fixed-type noise is cached so every
/// instance of a gate type shares one unitary.
pub struct Realizer<'a> {
    noise: &'a NoiseModel,
    layout: EnvLayout,
    seeder: Seeder,
    fixed: HashMap<u64, RealizedOp>,
    coherent: HashMap<(GateKey, GateKey, Sign), Arc<DenseOperator>>,
    inserted: HashMap<String, Arc<DenseOperator>>,
}

impl<'a> Realizer<'a> {
    pub fn new(noise: &'a NoiseModel, n_sys: usize, seeder: Seeder) -> Result<Self, SimError> {
        let layout = match noise {
            NoiseModel::Env(spec) => {
                if spec.layout.n_sys != n_sys {
                    return Err(SimError::Dimension { expected: spec.layout.n_sys, got: n_sys });
                }
                spec.layout
            }
            _ => EnvLayout::new(n_sys, 0),
        };
        if layout.total() > STATE_VECTOR_CAP {
            return Err(SimError::TooLarge(layout.total(), STATE_VECTOR_CAP));
        }
        Ok(Realizer {
            noise,
            layout,
            seeder,
            fixed: HashMap::new(),
            coherent: HashMap::new(),
            inserted: HashMap::new(),
        })
    }

    pub fn layout(&self) -> EnvLayout {
        self.layout
    }

    fn dense_env_op(&self, h: EnvNoise) -> Result<RealizedOp, SimError> {
        if self.layout.total() <= FULL_UNITARY_CAP {
            Ok(RealizedOp::Dense(Arc::new(h.unitary()?)))
        } else {
            Ok(RealizedOp::Hamiltonian(Arc::new(h)))
        }
    }

    /// Operations for one physical gate, noise last.
    pub fn realize(&mut self, g: &PhysicalGate) -> Result<Vec<RealizedOp>, SimError> {
        match g {
            PhysicalGate::Inserted { index, pauli, noiseless } => self.realize_inserted(*index, pauli, *noiseless),
            PhysicalGate::Rotation(r) => self.realize_rotation(r),
        }
    }

    fn realize_inserted(
        &mut self,
        index: usize,
        pauli: &PauliString,
        noiseless: bool,
    ) -> Result<Vec<RealizedOp>, SimError> {
        let mut ops = vec![RealizedOp::Pauli(PauliAction::new(&self.layout.lift(pauli)))];
        if noiseless {
            return Ok(ops);
        }
        match self.noise {
            NoiseModel::Noiseless => {}
            NoiseModel::Env(spec) => {
                if let Some(h) = spec.inserted_noise(index as u64, &self.seeder)? {
                    ops.push(RealizedOp::Hamiltonian(Arc::new(h)));
                }
            }
            NoiseModel::Coherent(spec) => {
                let key = pauli.to_string();
                if let Some(err) = spec.inserted.get(&key) {
                    let m = match self.inserted.get(&key) {
                        Some(m) => m.clone(),
                        None => {
                            let m = Arc::new(err.perturbation(Sign::Plus)?);
                            self.inserted.insert(key, m.clone());
                            m
                        }
                    };
                    ops.push(RealizedOp::Local { matrix: m, qubits: (0..pauli.n()).collect() });
                }
            }
        }
        Ok(ops)
    }

    fn realize_rotation(&mut self, r: &PhysicalRotation) -> Result<Vec<RealizedOp>, SimError> {
        let lifted = self.layout.lift(r.gate.pauli());
        let bare = RealizedOp::Rotation { action: PauliAction::new(&lifted), theta: r.gate.theta() };
        match self.noise {
            NoiseModel::Noiseless => Ok(vec![bare]),
            NoiseModel::Env(spec) => {
                // Fixed noise follows the nominal type and sign, so angle
                // corrections do not redraw it.
                let theta = r.sign.value() * r.nominal.theta();
                let fixed = spec.computational == NoisePolicy::Fixed;
                let label = GateKey::new(r.gate.pauli(), theta).label();
                if fixed {
                    if let Some(op) = self.fixed.get(&label) {
                        return Ok(vec![bare, op.clone()]);
                    }
                }
                match spec.gate_noise(r.gate.pauli(), theta, r.sign, r.instance, &self.seeder)? {
                    None => Ok(vec![bare]),
                    Some(h) if fixed => {
                        let op = self.dense_env_op(h)?;
                        self.fixed.insert(label, op.clone());
                        Ok(vec![bare, op])
                    }
                    Some(h) => Ok(vec![bare, RealizedOp::Hamiltonian(Arc::new(h))]),
                }
            }
            NoiseModel::Coherent(spec) => {
                let Some(err) = spec.gates.get(&r.nominal) else {
                    return Ok(vec![bare]);
                };
                let key = (r.gate.key(), r.nominal.clone(), r.sign);
                let m = match self.coherent.get(&key) {
                    Some(m) => m.clone(),
                    None => {
                        let m = Arc::new(apply_coherent(&r.gate.local_unitary(), err, r.sign)?);
                        self.coherent.insert(key, m.clone());
                        m
                    }
                };
                Ok(vec![RealizedOp::Local { matrix: m, qubits: r.gate.qubits().to_vec() }])
            }
        }
    }
}

/// Applies `gates` with their noise to `init`.
pub fn run_physical(
    gates: &[PhysicalGate],
    realizer: &mut Realizer,
    init: &StateVector,
) -> Result<StateVector, SimError> {
    if init.layout != realizer.layout() {
        return Err(SimError::Dimension { expected: realizer.layout().dim(), got: init.amps.len() });
    }
    let mut s = init.clone();
    for g in gates {
        for op in realizer.realize(g)? {
            op.apply(&mut s)?;
        }
    }
    let norm = s.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(SimError::NormDrift(norm));
    }
    Ok(s)
}

/// One noisy execution of a dressed circuit; all noise draws come from `seeder`.
pub fn run_shot(
    d: &DressedCircuit,
    noise: &NoiseModel,
    init: &StateVector,
    seeder: &Seeder,
) -> Result<StateVector, SimError> {
    let mut r = Realizer::new(noise, d.base.n, seeder.clone())?;
    run_physical(&d.physical_gates()?, &mut r, init)
}

/// One noisy execution of the undressed circuit.
pub fn run_plain(
    c: &LayeredCircuit,
    corrections: &BTreeMap<GateKey, f64>,
    noise: &NoiseModel,
    init: &StateVector,
    seeder: &Seeder,
) -> Result<StateVector, SimError> {
    let mut r = Realizer::new(noise, c.n, seeder.clone())?;
    run_physical(&plain_physical_gates(c, corrections)?, &mut r, init)
}

/// Full-register matrix of a sequence of realised operations.
pub fn ops_unitary(ops: &[RealizedOp], layout: EnvLayout) -> Result<DenseOperator, SimError> {
    if layout.total() > FULL_UNITARY_CAP {
        return Err(SimError::TooLarge(layout.total(), FULL_UNITARY_CAP));
    }
    let dim = layout.dim();
    let mut u = DenseOperator::zeros(dim, dim);
    for j in 0..dim {
        let mut s = StateVector::basis(layout, j);
        for op in ops {
            op.apply(&mut s)?;
        }
        for (i, a) in s.amps.iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

/// The state averaged exactly over every draw of the correlated Paulis.
///
/// Block `b` sits between `σ_{v_b}` on both sides, with the inserted noise of
/// index `b − 1` in front of it, so the average factorises block by block:
/// `ρ ← 4^{−n} Σ_v P_v W_b(v) P_v ρ P_v W_b(v)† P_v`.
pub fn twirl_averaged_density(
    c: &LayeredCircuit,
    corrections: &BTreeMap<GateKey, f64>,
    options: DressOptions,
    noise: &NoiseModel,
    seeder: &Seeder,
    rho0: &DenseOperator,
) -> Result<DenseOperator, SimError> {
    if let NoiseModel::Coherent(spec) = noise {
        if !spec.inserted.is_empty() {
            return Err(SimError::InsertedCoherent);
        }
    }
    let mut realizer = Realizer::new(noise, c.n, seeder.clone())?;
    let layout = realizer.layout();
    if rho0.nrows() != layout.dim() {
        return Err(SimError::Dimension { expected: layout.dim(), got: rho0.nrows() });
    }
    let offsets = gate_offsets(c);
    let paulis: Vec<(PauliString, PauliAction)> = all_strings(c.n)
        .into_iter()
        .map(|v| {
            let action = PauliAction::new(&layout.lift(&v));
            (v, action)
        })
        .collect();
    let weight = c64(1.0 / paulis.len() as f64, 0.0);
    let mut rho = rho0.clone();
    for (b, block) in c.blocks.iter().enumerate() {
        let front = realizer.realize(&PhysicalGate::Inserted {
            index: b,
            pauli: PauliString::identity(c.n),
            noiseless: false,
        })?;
        let mut cache: HashMap<Vec<Vec<Sign>>, DenseOperator> = HashMap::new();
        let mut next = DenseOperator::zeros(rho.nrows(), rho.ncols());
        for (v, pv) in &paulis {
            let signs = crate::dress::block_signs(block, v)?;
            if !cache.contains_key(&signs) {
                let mut ops = front.clone();
                for r in block_rotations(c, b, offsets[b], &signs, corrections, options.spt)? {
                    ops.extend(realizer.realize(&PhysicalGate::Rotation(r))?);
                }
                cache.insert(signs.clone(), ops_unitary(&ops, layout)?);
            }
            let u = &cache[&signs];
            next += pauli_conjugate(pv, &(u * pauli_conjugate(pv, &rho) * u.adjoint()));
        }
        rho = next * weight;
    }
    if !options.virtual_final_frame && !c.blocks.is_empty() {
        let tail = realizer.realize(&PhysicalGate::Inserted {
            index: c.blocks.len(),
            pauli: PauliString::identity(c.n),
            noiseless: false,
        })?;
        let u = ops_unitary(&tail, layout)?;
        rho = &u * rho * u.adjoint();
    }
    Ok(rho)
}

/// `P ρ P` for a Hermitian Pauli `P`.
fn pauli_conjugate(p: &PauliAction, rho: &DenseOperator) -> DenseOperator {
    let d = rho.nrows();
    let phase: Vec<Complex64> = (0..d).map(|b| p.coeff(b)).collect();
    let mut out = DenseOperator::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            out[(i ^ p.x_mask, j ^ p.x_mask)] = phase[i] * phase[j].conj() * rho[(i, j)];
        }
    }
    out
}

/// `Re tr(ρ (obs ⊗ I_env))` for a system observable.
pub fn density_expectation(rho: &DenseOperator, obs: &PauliString, layout: EnvLayout) -> Result<f64, SimError> {
    if obs.n() != layout.n_sys {
        return Err(SimError::Dimension { expected: layout.n_sys, got: obs.n() });
    }
    if rho.nrows() != layout.dim() {
        return Err(SimError::Dimension { expected: layout.dim(), got: rho.nrows() });
    }
    let act = PauliAction::new(&layout.lift(obs));
    // tr(ρP) = Σ_b ⟨b|ρ P|b⟩ = Σ_b c(b) ρ[b, b ⊕ x].
    let v: Complex64 = (0..rho.nrows()).map(|b| act.coeff(b) * rho[(b, b ^ act.x_mask)]).sum();
    Ok(v.re)
}

/// Partial trace over the environment.
pub fn trace_env(rho: &DenseOperator, layout: EnvLayout) -> DenseOperator {
    let ds = 1usize << layout.n_sys;
    let de = 1usize << layout.n_env;
    DenseOperator::from_fn(ds, ds, |i, j| (0..de).map(|e| rho[(i * de + e, j * de + e)]).sum())
}

/// `½‖a − b‖₁` for density matrices.
pub fn trace_distance(a: &DenseOperator, b: &DenseOperator) -> Result<f64, SimError> {
    if a.shape() != b.shape() {
        return Err(SimError::Dimension { expected: a.nrows(), got: b.nrows() });
    }
    let diff = a - b;
    let herm = (&diff + diff.adjoint()) * c64(0.5, 0.0);
    Ok(0.5 * hermitian_eigenvalues(&herm).iter().map(|x| x.abs()).sum::<f64>())
}

/// Trace distance between the reduced system states.
pub fn trace_distance_system(a: &StateVector, b: &StateVector) -> Result<f64, SimError> {
    if a.layout != b.layout {
        return Err(SimError::Dimension { expected: a.amps.len(), got: b.amps.len() });
    }
    trace_distance(&a.reduced_system(), &b.reduced_system())
}

/// `sqrt(Σ p_k (ideal − x_k)²)`.
pub fn rms_error(ideal: f64, samples: &[(f64, f64)]) -> Result<f64, SimError> {
    if samples.is_empty() {
        return Err(SimError::Empty);
    }
    let total: f64 = samples.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SimError::Probability(total));
    }
    Ok(samples.iter().map(|(p, x)| p * (ideal - x).powi(2)).sum::<f64>().sqrt())
}

/// RMS error over equally weighted samples.
pub fn rms_error_uniform(ideal: f64, values: &[f64]) -> Result<f64, SimError> {
    let p = 1.0 / values.len().max(1) as f64;
    let samples: Vec<(f64, f64)> = values.iter().map(|&x| (p, x)).collect();
    rms_error(ideal, &samples)
}

/// `min_φ ‖u − e^{iφ}v‖_F / √dim` for unitaries.
pub fn operator_distance_up_to_phase(u: &DenseOperator, v: &DenseOperator) -> Result<f64, SimError> {
    if u.shape() != v.shape() || u.nrows() != u.ncols() {
        return Err(SimError::Dimension { expected: u.nrows(), got: v.nrows() });
    }
    if !is_unitary(u, 1e-8) || !is_unitary(v, 1e-8) {
        return Err(SimError::NonUnitary);
    }
    Ok(crate::linalg::phase_free_distance(u, v))
}

/// Equal-weight ensemble for a maximally mixed environment: the system state
/// tensored with each environment basis state.
pub fn mixed_env_ensemble(layout: EnvLayout, sys: &[Complex64]) -> Result<Vec<(f64, StateVector)>, SimError> {
    let base = StateVector::with_system(layout, sys)?;
    let de = 1usize << layout.n_env;
    Ok((0..de)
        .map(|e| {
            let mut amps = vec![c64(0.0, 0.0); layout.dim()];
            for (i, a) in base.amps.iter().enumerate() {
                if i % de == 0 {
                    amps[i + e] = *a;
                }
            }
            (1.0 / de as f64, StateVector { amps, layout })
        })
        .collect())
}

/// Size of the sign-odd part of the error on one noisy gate along `σ ⊗ M`,
/// summed in quadrature over every environment Pauli `M ≠ I`.
///
/// The error of sign branch `s` is `V(s)†W(s)` with `W(s)` the executed
/// sequence (rewritten by the single Pauli transformation when `spt`) and
/// `V(s) = e^{−isσθ} ⊗ I`; each branch is first rephased so its trace is
/// real, since canonical angles move global phases between the branches.
pub fn sign_odd_env_component(
    g: &crate::circuit::RotationGate,
    spt: bool,
    spec: &crate::noise::EnvNoiseSpec,
    seeder: &Seeder,
) -> Result<f64, SimError> {
    let n = g.pauli().n();
    let c = LayeredCircuit::from_layers(n, vec![crate::circuit::Layer::new(vec![g.clone()])]);
    let spec = crate::noise::EnvNoiseSpec { inserted: NoisePolicy::Off, ..spec.clone() };
    let noise = NoiseModel::Env(spec);
    let mut realizer = Realizer::new(&noise, n, seeder.clone())?;
    let layout = realizer.layout();
    let sigma = layout.lift(g.pauli());
    let env_paulis: Vec<PauliString> = all_strings(layout.n_env).into_iter().filter(|m| !m.is_identity()).collect();
    let mut branch = |s: Sign| -> Result<Vec<Complex64>, SimError> {
        let mut ops = Vec::new();
        for r in block_rotations(&c, 0, 0, &[vec![s]], &BTreeMap::new(), spt)? {
            ops.extend(realizer.realize(&PhysicalGate::Rotation(r))?);
        }
        let w = ops_unitary(&ops, layout)?;
        let v = crate::circuit::rotation_matrix(&sigma, s.value() * g.theta());
        let e = v.adjoint() * w;
        let tr = e.trace();
        let e = e * (tr.conj() / tr.norm());
        let dim = layout.dim() as f64;
        env_paulis
            .iter()
            .map(|m| {
                let mut p = sigma.clone();
                for q in 0..layout.n_env {
                    p.set(layout.n_sys + q, m.get(q));
                }
                Ok((crate::pauli::to_matrix(&p)? * &e).trace() / dim)
            })
            .collect()
    };
    let plus = branch(Sign::Plus)?;
    let minus = branch(Sign::Minus)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / 2.0)
}

/// Per-shot outputs of a simulation run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResult {
    pub values: Vec<f64>,
    /// Stream label of each shot under the master seed.
    pub draw_ids: Vec<u64>,
    pub master_seed: u64,
    pub metadata: BTreeMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ideal_unitary, rotation_matrix, Layer, RotationGate};
    use crate::dress::{dress, dress_with_draws};
    use crate::linalg::identity;
    use crate::noise::{CoherentError, EnvNoiseSpec};
    use crate::pauli::to_matrix;
    use crate::rng::substream;
    use rand::Rng;
    use std::f64::consts::PI;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn random_circuit(n: usize, layers: usize, rng: &mut impl Rng) -> LayeredCircuit {
        let mut c = LayeredCircuit::new(n);
        for _ in 0..layers {
            let q = rng.gen_range(0..n);
            let mut gates = Vec::new();
            if n > 1 && rng.gen_bool(0.5) {
                let r = (q + 1) % n;
                let letters: String = (0..2).map(|_| ['X', 'Y', 'Z'][rng.gen_range(0..3)]).collect();
                gates.push(RotationGate::on(n, &letters, &[q, r], rng.gen_range(0.0..PI)).unwrap());
            } else {
                let l = ['X', 'Y', 'Z'][rng.gen_range(0..3)].to_string();
                gates.push(RotationGate::on(n, &l, &[q], rng.gen_range(0.0..PI)).unwrap());
            }
            c.push_layer(Layer::new(gates));
        }
        c
    }

    /// Step-by-step full-matrix product, independent of the kernels.
    fn oracle(d: &DressedCircuit, noise: &NoiseModel, seeder: &Seeder, init: &StateVector) -> Vec<Complex64> {
        let layout = init.layout;
        let mut u = identity(layout.dim());
        for g in d.physical_gates().unwrap() {
            match g {
                PhysicalGate::Inserted { index, pauli, noiseless } => {
                    u = to_matrix(&layout.lift(&pauli)).unwrap() * u;
                    if let (NoiseModel::Env(spec), false) = (noise, noiseless) {
                        if let Some(h) = spec.inserted_noise(index as u64, seeder).unwrap() {
                            u = expm_full(&h) * u;
                        }
                    }
                }
                PhysicalGate::Rotation(r) => {
                    u = rotation_matrix(&layout.lift(r.gate.pauli()), r.gate.theta()) * u;
                    if let NoiseModel::Env(spec) = noise {
                        let theta = r.sign.value() * r.nominal.theta();
                        if let Some(h) = spec.gate_noise(r.gate.pauli(), theta, r.sign, r.instance, seeder).unwrap() {
                            u = expm_full(&h) * u;
                        }
                    }
                }
            }
        }
        let v = nalgebra::DVector::from_vec(init.amps.clone());
        (u * v).iter().copied().collect()
    }

    fn expm_full(h: &EnvNoise) -> DenseOperator {
        // Vector Taylor series on each basis column, independent of the dense exponential.
        let dim = h.layout.dim();
        let mut u = DenseOperator::zeros(dim, dim);
        for j in 0..dim {
            let mut v = vec![c64(0.0, 0.0); dim];
            v[j] = c64(1.0, 0.0);
            h.apply_to_state(&mut v).unwrap();
            u.set_column(j, &nalgebra::DVector::from_vec(v));
        }
        u
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_x_flips_zero() {
        let c =
            LayeredCircuit::from_layers(1, vec![Layer::new(vec![RotationGate::on(1, "X", &[0], PI / 2.0).unwrap()])]);
        let layout = EnvLayout::new(1, 0);
        let s = run_plain(&c, &BTreeMap::new(), &NoiseModel::Noiseless, &StateVector::zero(layout), &Seeder::new(0))
            .unwrap();
        assert!((s.amps[1].norm() - 1.0).abs() < 1e-14);
        assert!((s.expectation(&p("Z")).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_shot_matches_ideal_unitary() {
        let mut rng = substream(3, &[0]);
        for _ in 0..20 {
            let c = random_circuit(3, 6, &mut rng).reblock(2);
            let d = dress(&c, &mut rng);
            let layout = EnvLayout::new(3, 0);
            let init = StateVector::basis(layout, rng.gen_range(0..8));
            let s = run_shot(&d, &NoiseModel::Noiseless, &init, &Seeder::new(1)).unwrap();
            let expect = ideal_unitary(&c).unwrap() * nalgebra::DVector::from_vec(init.amps.clone());
            let overlap: Complex64 = s.amps.iter().zip(expect.iter()).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noisy_shots_match_matrix_product_oracle() {
        let mut rng = substream(4, &[0]);
        for trial in 0..100 {
            let (n_sys, n_env) = [(1, 1), (2, 2), (2, 1), (3, 1), (2, 0)][trial % 5];
            let layout = EnvLayout::new(n_sys, n_env);
            let c = random_circuit(n_sys, 5, &mut rng).reblock(1 + trial % 3);
            let d = dress(&c, &mut rng);
            let mut spec = EnvNoiseSpec::new(layout, 0.05);
            spec.computational = [NoisePolicy::Fixed, NoisePolicy::PerGate][trial % 2];
            spec.bias_factor = (trial % 4 == 0).then_some(10.0);
            let noise = if n_env == 0 { NoiseModel::Noiseless } else { NoiseModel::Env(spec) };
            let seeder = Seeder::new(trial as u64);
            let amps: Vec<Complex64> =
                (0..layout.dim()).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            let init = StateVector::from_amps(layout, amps.iter().map(|a| a / norm).collect()).unwrap();
            let got = run_shot(&d, &noise, &init, &seeder).unwrap();
            let want = oracle(&d, &noise, &seeder, &init);
            assert!(max_diff(&got.amps, &want) < 1e-10, "trial {trial}: {}", max_diff(&got.amps, &want));
        }
    }

    #[test]
    fn local_kernel_matches_embedding() {
        let mut rng = substream(5, &[0]);
        let layout = EnvLayout::new(4, 0);
        for qubits in [vec![2usize], vec![0, 3], vec![3, 1], vec![2, 0, 1]] {
            let k = qubits.len();
            let m =
                DenseOperator::from_fn(1 << k, 1 << k, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let mut s = StateVector::basis(layout, 0);
            s.amps = (0..16).map(|_| c64(rng.gen_range(-1.0..1.0), 0.0)).collect();
            let before = s.amps.clone();
            s.apply_local(&m, &qubits).unwrap();
            // Oracle: expand m in the Pauli basis and embed each term.
            let mut full = DenseOperator::zeros(16, 16);
            for w in all_strings(k) {
                let wm = to_matrix(&w).unwrap();
                let coef = (wm.adjoint() * &m).trace() / c64((1 << k) as f64, 0.0);
                full += to_matrix(&w.embed(4, &qubits)).unwrap() * coef;
            }
            let want = full * nalgebra::DVector::from_vec(before);
            assert!(max_diff(&s.amps, want.as_slice()) < 1e-12);
        }
    }

    #[test]
    fn expectation_examples() {
        let layout = EnvLayout::new(1, 0);
        assert!((StateVector::zero(layout).expectation(&p("Z")).unwrap() - 1.0).abs() < 1e-15);
        assert!(StateVector::plus(layout).expectation(&p("Z")).unwrap().abs() < 1e-15);
        let layout = EnvLayout::new(3, 1);
        let mut rng = substream(6, &[0]);
        let amps: Vec<Complex64> = (0..16).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = StateVector::from_amps(layout, amps.iter().map(|a| a / norm).collect()).unwrap();
        let obs = p("XZI");
        let m = to_matrix(&layout.lift(&obs)).unwrap();
        let v = nalgebra::DVector::from_vec(s.amps.clone());
        let want = (v.adjoint() * m * &v)[(0, 0)].re;
        assert!((s.expectation(&obs).unwrap() - want).abs() < 1e-12);
        assert!((density_expectation(&s.density(), &obs, layout).unwrap() - want).abs() < 1e-12);
        assert!(matches!(s.expectation(&p("IIIZ")), Err(SimError::EnvObservable(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let layout = EnvLayout::new(1, 0);
        let zero = StateVector::zero(layout);
        let one = StateVector::basis(layout, 1);
        let plus = StateVector::plus(layout);
        assert!(trace_distance_system(&zero, &zero).unwrap().abs() < 1e-15);
        assert!((trace_distance_system(&zero, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!((trace_distance_system(&zero, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn reduced_state_of_a_bell_pair_is_mixed() {
        let layout = EnvLayout::new(1, 1);
        let h = 0.5f64.sqrt();
        let s = StateVector::from_amps(layout, vec![c64(h, 0.), c64(0., 0.), c64(0., 0.), c64(h, 0.)]).unwrap();
        let rho = s.reduced_system();
        assert!((rho - identity(2) * c64(0.5, 0.0)).norm() < 1e-15);
        assert!((trace_env(&s.density(), layout) - s.reduced_system()).norm() < 1e-15);
    }

    #[test]
    fn rms_error_examples() {
        assert_eq!(rms_error(0.3, &[(0.5, 0.3), (0.5, 0.3)]).unwrap(), 0.0);
        assert!((rms_error(1.0, &[(0.5, 1.0), (0.5, 0.0)]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let mut rng = substream(7, &[0]);
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut acc = 0.0;
        for x in &xs {
            acc += (0.2 - x) * (0.2 - x);
        }
        assert!((rms_error_uniform(0.2, &xs).unwrap() - (acc / 50.0).sqrt()).abs() < 1e-14);
        assert_eq!(rms_error(0.0, &[]), Err(SimError::Empty));
        assert!(matches!(rms_error(0.0, &[(0.4, 0.0)]), Err(SimError::Probability(_))));
    }

    #[test]
    fn operator_distance_examples() {
        let x = to_matrix(&p("X")).unwrap();
        assert!(operator_distance_up_to_phase(&x, &x).unwrap() < 1e-15);
        assert!(operator_distance_up_to_phase(&x, &(&x * Complex64::from_polar(1.0, 1.1))).unwrap() < 1e-15);
        assert!((operator_distance_up_to_phase(&identity(2), &x).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(operator_distance_up_to_phase(&(x * c64(2.0, 0.0)), &identity(2)), Err(SimError::NonUnitary));
    }

    #[test]
    fn coherent_noise_uses_the_local_perturbation() {
        let c =
            LayeredCircuit::from_layers(2, vec![Layer::new(vec![RotationGate::on(2, "ZX", &[0, 1], 0.7).unwrap()])]);
        let g = c.gates().next().unwrap().clone();
        let mut spec = crate::noise::CoherentNoiseSpec::default();
        let err = CoherentError::from_sign_pair(0.05, &[p("ZX"), p("YI")], &[0.3, -0.2], &[0.6, 0.1]);
        spec.gates.insert(g.key(), err.clone());
        let noise = NoiseModel::Coherent(spec);
        let layout = EnvLayout::new(2, 0);
        for v in all_strings(2) {
            let d = dress_with_draws(&c, vec![v]).unwrap();
            let s = run_shot(&d, &noise, &StateVector::zero(layout), &Seeder::new(0)).unwrap();
            let sign = d.signs[0][0][0];
            let mut u = to_matrix(&d.inserted[0]).unwrap();
            u = apply_coherent(&rotation_matrix(&p("ZX"), sign.value() * 0.7), &err, sign).unwrap() * u;
            u = to_matrix(&d.inserted[1]).unwrap() * u;
            let overlap: Complex64 = s.amps.iter().zip(u.column(0).iter()).map(|(a, b)| a.conj() * b).sum();
            assert!((overlap.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_twirl_average_matches_enumeration() {
        let mut rng = substream(8, &[0]);
        let layout = EnvLayout::new(2, 1);
        let c = random_circuit(2, 3, &mut rng).reblock(1);
        let mut spec = EnvNoiseSpec::new(layout, 0.1);
        spec.computational = NoisePolicy::PerGate;
        let noise = NoiseModel::Env(spec);
        let seeder = Seeder::new(11);
        let init = StateVector::zero(layout);
        for virtual_final_frame in [false, true] {
            let options = DressOptions { spt: false, virtual_final_frame };
            let got = twirl_averaged_density(&c, &BTreeMap::new(), options, &noise, &seeder, &init.density()).unwrap();
            let mut want = DenseOperator::zeros(8, 8);
            let all = all_strings(2);
            let mut count = 0.0;
            for a in &all {
                for b in &all {
                    for e in &all {
                        let d =
                            dress_with_draws(&c, vec![a.clone(), b.clone(), e.clone()]).unwrap().with_options(options);
                        want += run_shot(&d, &noise, &init, &seeder).unwrap().density();
                        count += 1.0;
                    }
                }
            }
            want /= c64(count, 0.0);
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn mixed_env_ensemble_averages_to_identity_on_env() {
        let layout = EnvLayout::new(1, 2);
        let ens = mixed_env_ensemble(layout, &[c64(1.0, 0.0), c64(0.0, 0.0)]).unwrap();
        let mut rho = DenseOperator::zeros(8, 8);
        for (w, s) in &ens {
            rho += s.density() * c64(*w, 0.0);
        }
        let want = crate::linalg::kron(
            &DenseOperator::from_fn(2, 2, |i, j| c64((i + j == 0) as u8 as f64, 0.0)),
            &(identity(4) * c64(0.25, 0.0)),
        );
        assert!((rho - want).norm() < 1e-15);
    }
}
