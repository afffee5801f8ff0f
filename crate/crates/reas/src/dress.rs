//! Correlated random-Pauli dressing.
//!
//! Block `b` is sandwiched by a uniformly random `σ_{v_b}`. Consecutive
//! sandwiches merge, so the physical inserted gates are `σ_{v_1}`,
//! `σ_{v_{b+1}}σ_{v_b}` between blocks and `σ_{v_B}` at the end. A gate
//! `e^{−iσθ}` inside block `b` is replaced by `e^{−isσθ}` with
//! `s = ±1` the commutation sign of `σ` and `σ_{v_b}`, which makes
//! `σ_{v_b} e^{−isσθ} σ_{v_b} = e^{−iσθ}` for every draw.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{gate_line, CircuitError, GateKey, LayeredCircuit, RotationGate};
use crate::linalg::{identity, DenseOperator};
use crate::pauli::{
    commutation_sign, correlated_difference, sample_uniform, to_matrix, Pauli1, PauliError, PauliString, Sign,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DressError {
    #[error("expected {expected} draws, got {got}")]
    DrawCount { expected: usize, got: usize },
    #[error("single Pauli transformation needs a weight-1 gate, got weight {0}")]
    NotSingleQubit(usize),
    #[error("partner qubit {partner} invalid for a gate on qubit {qubit} in a {n}-qubit register")]
    BadPartner { qubit: usize, partner: usize, n: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// Execution options carried by a dressed circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DressOptions {
    /// Rewrite every single-qubit rotation with the single Pauli transformation.
    pub spt: bool,
    /// Treat the trailing `σ_{v_B}` as a noiseless frame change absorbed into readout.
    pub virtual_final_frame: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressedCircuit {
    pub base: LayeredCircuit,
    /// Raw draws `v_1 … v_B`.
    pub draws: Vec<PauliString>,
    /// Physical inserted gates, `B + 1` of them.
    pub inserted: Vec<PauliString>,
    /// `signs[b][l][g]` for gate `g` of layer `l` in block `b`.
    pub signs: Vec<Vec<Vec<Sign>>>,
    /// Angle shifts per nominal gate type, subtracted before the sign flip.
    pub corrections: BTreeMap<GateKey, f64>,
    pub options: DressOptions,
}

/// Signs of every gate in a block against one draw, in gate order.
pub fn block_signs(block: &crate::circuit::Block, v: &PauliString) -> Result<Vec<Vec<Sign>>, PauliError> {
    block.layers.iter().map(|l| l.gates.iter().map(|g| commutation_sign(g.pauli(), v)).collect()).collect()
}

/// Draws `v_1 … v_B` uniformly and dresses `c`.
pub fn dress<R: Rng + ?Sized>(c: &LayeredCircuit, rng: &mut R) -> DressedCircuit {
    let draws = (0..c.blocks.len()).map(|_| sample_uniform(c.n, rng)).collect();
    dress_with_draws(c, draws).expect("draw count and width match by construction")
}

/// Dresses `c` with explicit draws.
pub fn dress_with_draws(c: &LayeredCircuit, draws: Vec<PauliString>) -> Result<DressedCircuit, DressError> {
    if draws.len() != c.blocks.len() {
        return Err(DressError::DrawCount { expected: c.blocks.len(), got: draws.len() });
    }
    let mut inserted = Vec::with_capacity(draws.len() + 1);
    if let Some(first) = draws.first() {
        inserted.push(first.phase_free());
        for w in draws.windows(2) {
            inserted.push(correlated_difference(&w[0], &w[1])?);
        }
        inserted.push(draws[draws.len() - 1].phase_free());
    }
    let signs = c.blocks.iter().zip(&draws).map(|(b, v)| block_signs(b, v)).collect::<Result<_, _>>()?;
    Ok(DressedCircuit {
        base: c.clone(),
        draws,
        inserted,
        signs,
        corrections: BTreeMap::new(),
        options: DressOptions::default(),
    })
}

/// Replaces every nominal angle `θ` by `θ − Δθ̂` before the sign flip.
/// Gate types absent from `shifts` get no shift and a warning.
pub fn apply_corrections(d: &DressedCircuit, shifts: &BTreeMap<GateKey, f64>) -> DressedCircuit {
    let mut missing = std::collections::BTreeSet::new();
    for g in d.base.gates() {
        let k = g.key();
        if !shifts.contains_key(&k) && missing.insert(k.clone()) {
            log::warn!("no calibration for {} at {:.6}; using zero shift", k.pauli, k.theta());
        }
    }
    let mut out = d.clone();
    out.corrections = shifts.clone();
    out
}

/// Effective nominal angle after correction.
pub fn corrected_theta(g: &RotationGate, corrections: &BTreeMap<GateKey, f64>) -> f64 {
    g.theta() - corrections.get(&g.key()).copied().unwrap_or(0.0)
}

/// A rotation as it is executed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalRotation {
    /// Generator and executed (canonical) angle.
    pub gate: RotationGate,
    /// Nominal type the rotation descends from.
    pub nominal: GateKey,
    /// Sign carried by this rotation; wrappers of the single Pauli transformation carry `+1`.
    pub sign: Sign,
    /// Stable per-circuit identifier, used to address per-instance noise.
    pub instance: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhysicalGate {
    Inserted { index: usize, pauli: PauliString, noiseless: bool },
    Rotation(PhysicalRotation),
}

/// Instance ids reserve this many slots per computational gate.
pub const INSTANCE_STRIDE: u64 = 8;

/// Index of the first computational gate of each block.
pub fn gate_offsets(c: &LayeredCircuit) -> Vec<u64> {
    let mut out = Vec::with_capacity(c.blocks.len());
    let mut k = 0u64;
    for b in &c.blocks {
        out.push(k);
        k += b.gates().count() as u64;
    }
    out
}

/// Partner qubit for the single Pauli transformation: odd qubits pair with
/// their right neighbour, even ones with their left, qubit 0 with qubit 1.
pub fn spt_partner(q: usize, n: usize) -> Option<usize> {
    if n < 2 {
        return None;
    }
    let p = if q == 0 {
        1
    } else if q % 2 == 1 {
        if q + 1 < n {
            q + 1
        } else {
            q - 1
        }
    } else {
        q - 1
    };
    Some(p)
}

/// One rotation of a single-Pauli-transformation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SptGate {
    pub gate: RotationGate,
    /// The central `ZZ` rotation, the only one that depends on `s`.
    pub core: bool,
}

/// Rewrites the physical gate `e^{−isσθ}` (σ single-qubit) as Clifford
/// wrappers around a `ZZ` rotation on (qubit, partner). The product of the
/// sequence, earliest first, equals `e^{−isσθ}` exactly.
pub fn single_pauli_transform(g: &RotationGate, partner: usize, s: Sign) -> Result<Vec<SptGate>, DressError> {
    let n = g.pauli().n();
    let q = match g.qubits() {
        [q] => *q,
        _ => return Err(DressError::NotSingleQubit(g.pauli().weight())),
    };
    if partner == q || partner >= n {
        return Err(DressError::BadPartner { qubit: q, partner, n });
    }
    let on = |a: Pauli1, b: Pauli1| {
        let mut ops = vec![(q, a)];
        if b != Pauli1::I {
            ops.push((partner, b));
        }
        PauliString::from_sparse(n, &ops)
    };
    let wrap = |p: PauliString, angle: f64| -> Result<SptGate, DressError> {
        Ok(SptGate { gate: RotationGate::canonical(p, angle)?, core: false })
    };
    let core = SptGate { gate: RotationGate::canonical(on(Pauli1::Z, Pauli1::Z), s.value() * g.theta())?, core: true };
    let xz = on(Pauli1::X, Pauli1::Z);
    let seq = match g.pauli().get(q) {
        Pauli1::Y => vec![wrap(xz.clone(), FRAC_PI_4)?, core, wrap(xz, -FRAC_PI_4)?],
        Pauli1::Z => {
            let xi = on(Pauli1::X, Pauli1::I);
            vec![
                wrap(xi.clone(), -FRAC_PI_4)?,
                wrap(xz.clone(), FRAC_PI_4)?,
                core,
                wrap(xz, -FRAC_PI_4)?,
                wrap(xi, FRAC_PI_4)?,
            ]
        }
        Pauli1::X => {
            let zi = on(Pauli1::Z, Pauli1::I);
            vec![
                wrap(zi.clone(), FRAC_PI_4)?,
                wrap(xz.clone(), FRAC_PI_4)?,
                core,
                wrap(xz, -FRAC_PI_4)?,
                wrap(zi, -FRAC_PI_4)?,
            ]
        }
        Pauli1::I => unreachable!("weight-1 gate has a non-identity letter"),
    };
    Ok(seq)
}

/// Executed rotations of block `b` for the given signs.
pub fn block_rotations(
    c: &LayeredCircuit,
    b: usize,
    offset: u64,
    signs: &[Vec<Sign>],
    corrections: &BTreeMap<GateKey, f64>,
    spt: bool,
) -> Result<Vec<PhysicalRotation>, DressError> {
    let mut out = Vec::new();
    let mut ordinal = offset;
    for (layer, layer_signs) in c.blocks[b].layers.iter().zip(signs) {
        let mut busy: std::collections::BTreeSet<usize> =
            layer.gates.iter().flat_map(|g| g.qubits().iter().copied()).collect();
        let mut deferred = Vec::new();
        for (g, &s) in layer.gates.iter().zip(layer_signs) {
            let theta = corrected_theta(g, corrections);
            let instance = ordinal * INSTANCE_STRIDE;
            ordinal += 1;
            let nominal = g.key();
            if spt && g.qubits().len() == 1 {
                let q = g.qubits()[0];
                let partner = spt_partner(q, c.n).ok_or(DressError::BadPartner { qubit: q, partner: q, n: c.n })?;
                let seq = single_pauli_transform(&g.with_theta(theta), partner, s)?;
                let rots: Vec<PhysicalRotation> = seq
                    .into_iter()
                    .enumerate()
                    .map(|(i, sg)| PhysicalRotation {
                        sign: if sg.core { s } else { Sign::Plus },
                        nominal: if sg.core { GateKey::new(sg.gate.pauli(), theta) } else { sg.gate.key() },
                        gate: sg.gate,
                        instance: instance + i as u64,
                    })
                    .collect();
                if busy.contains(&partner) {
                    deferred.extend(rots);
                } else {
                    busy.insert(partner);
                    out.extend(rots);
                }
            } else {
                out.push(PhysicalRotation { gate: g.with_theta(s.value() * theta), nominal, sign: s, instance });
            }
        }
        out.extend(deferred);
    }
    Ok(out)
}

/// The undressed circuit as executed: every sign `+1`, no insertions.
pub fn plain_physical_gates(
    c: &LayeredCircuit,
    corrections: &BTreeMap<GateKey, f64>,
) -> Result<Vec<PhysicalGate>, DressError> {
    let offsets = gate_offsets(c);
    let mut out = Vec::new();
    for (b, block) in c.blocks.iter().enumerate() {
        let signs: Vec<Vec<Sign>> = block.layers.iter().map(|l| vec![Sign::Plus; l.gates.len()]).collect();
        for r in block_rotations(c, b, offsets[b], &signs, corrections, false)? {
            out.push(PhysicalGate::Rotation(r));
        }
    }
    Ok(out)
}

impl DressedCircuit {
    pub fn with_options(mut self, options: DressOptions) -> Self {
        self.options = options;
        self
    }

    pub fn block_count(&self) -> usize {
        self.base.blocks.len()
    }

    /// Executed sequence: insertions interleaved with sign-flipped, corrected blocks.
    pub fn physical_gates(&self) -> Result<Vec<PhysicalGate>, DressError> {
        let offsets = gate_offsets(&self.base);
        let mut out = Vec::new();
        let last = self.inserted.len().saturating_sub(1);
        for (b, signs) in self.signs.iter().enumerate() {
            out.push(PhysicalGate::Inserted { index: b, pauli: self.inserted[b].clone(), noiseless: false });
            for r in block_rotations(&self.base, b, offsets[b], signs, &self.corrections, self.options.spt)? {
                out.push(PhysicalGate::Rotation(r));
            }
        }
        if let Some(p) = self.inserted.last() {
            out.push(PhysicalGate::Inserted {
                index: last,
                pauli: p.clone(),
                noiseless: self.options.virtual_final_frame,
            });
        }
        Ok(out)
    }

    /// Noiseless product of the executed sequence.
    pub fn noiseless_unitary(&self) -> Result<DenseOperator, DressError> {
        let mut u = identity(1 << self.base.n);
        for g in self.physical_gates()? {
            u = match g {
                PhysicalGate::Inserted { pauli, .. } => to_matrix(&pauli)? * u,
                PhysicalGate::Rotation(r) => crate::circuit::rotation_matrix(r.gate.pauli(), r.gate.theta()) * u,
            };
        }
        Ok(u)
    }

    /// Circuit text with inserted gates tagged `ins`.
    pub fn to_text(&self) -> Result<String, DressError> {
        let mut s = format!("qubits {}\n", self.base.n);
        let mut block = None;
        for g in self.physical_gates()? {
            match g {
                PhysicalGate::Inserted { index, pauli, .. } => {
                    if index < self.block_count() {
                        s.push_str(&format!("block {index}\nlayer\n"));
                        block = Some(index);
                    }
                    s.push_str(&format!("ins {pauli}\n"));
                }
                PhysicalGate::Rotation(r) => {
                    debug_assert!(block.is_some());
                    s.push_str(&gate_line(&r.gate));
                }
            }
        }
        Ok(s)
    }
}
