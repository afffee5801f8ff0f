//! Layered Pauli-rotation circuits.
//!
//! A circuit is a list of blocks, a block is a list of layers and a layer is a
//! set of rotations `e^{−iσθ}` on pairwise disjoint qubits. Angles are kept in
//! the canonical window `[0, π)`; `e^{−iσ(θ+π)} = −e^{−iσθ}` so the reduction
//! only moves a global phase.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::linalg::{c64, identity, DenseOperator};
use crate::pauli::{to_matrix, Pauli1, PauliAction, PauliError, PauliString};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("gate generator must have weight 1 or 2, got {0}")]
    BadWeight(usize),
    #[error("gate on qubit {qubit} outside a {n}-qubit register")]
    OutOfRange { qubit: usize, n: usize },
    #[error("block {block} layer {layer}: supports overlap on qubit {qubit}")]
    Overlap { block: usize, layer: usize, qubit: usize },
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("block {block} has {layers} layers, cap is {cap}")]
    BlockTooLong { block: usize, layers: usize, cap: usize },
    #[error("angle {0} is not finite")]
    BadAngle(f64),
    #[error("{0} qubits exceeds the dense-operator cap of {1}")]
    TooLarge(usize, usize),
    #[error("expected {expected} ZZ angles, got {got}")]
    AngleCount { expected: usize, got: usize },
    #[error("Trotter chain needs at least 2 sites and 1 step")]
    TrotterShape,
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Reduce an angle to `[0, π)`. The flag reports whether anything moved.
pub fn canonical_angle(theta: f64) -> (f64, bool) {
    let r = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π.
    let r = if r >= PI { 0.0 } else { r };
    let moved = (r - theta).abs() > 0.0;
    (r, moved)
}

/// Single- or two-qubit rotation `e^{−iσθ}`.
#[derive(Clone, PartialEq)]
pub struct RotationGate {
    pauli: PauliString,
    theta: f64,
    qubits: Vec<usize>,
}

impl RotationGate {
    /// `pauli` is a full-register string; its support becomes the gate's qubits.
    pub fn new(pauli: PauliString, theta: f64) -> Result<Self, CircuitError> {
        let w = pauli.weight();
        if !(1..=2).contains(&w) {
            return Err(CircuitError::BadWeight(w));
        }
        if !theta.is_finite() {
            return Err(CircuitError::BadAngle(theta));
        }
        let (canon, moved) = canonical_angle(theta);
        if moved {
            log::warn!("angle {theta} reduced to {canon} for {pauli}");
        }
        let qubits = pauli.support();
        Ok(RotationGate { pauli: pauli.phase_free(), theta: canon, qubits })
    }

    /// Like [`RotationGate::new`] but reduces the angle without logging.
    pub fn canonical(pauli: PauliString, theta: f64) -> Result<Self, CircuitError> {
        if !theta.is_finite() {
            return Err(CircuitError::BadAngle(theta));
        }
        Ok(RotationGate::new(pauli, 0.0)?.with_theta(theta))
    }

    /// Gate from local letters placed on `qubits` of an `n`-qubit register.
    pub fn on(n: usize, letters: &str, qubits: &[usize], theta: f64) -> Result<Self, CircuitError> {
        let local: PauliString = letters.parse()?;
        if local.n() != qubits.len() {
            return Err(CircuitError::Pauli(PauliError::LengthMismatch(local.n(), qubits.len())));
        }
        if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
            return Err(CircuitError::OutOfRange { qubit: q, n });
        }
        RotationGate::new(local.embed(n, qubits), theta)
    }

    pub fn pauli(&self) -> &PauliString {
        &self.pauli
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    /// Generator restricted to the gate's own qubits.
    pub fn local_pauli(&self) -> PauliString {
        self.pauli.restrict(&self.qubits)
    }

    /// Same generator, new angle (canonicalised).
    pub fn with_theta(&self, theta: f64) -> Self {
        let (canon, _) = canonical_angle(theta);
        RotationGate { pauli: self.pauli.clone(), theta: canon, qubits: self.qubits.clone() }
    }

    /// `cos θ · I − i sin θ · σ` on the gate's support.
    pub fn local_unitary(&self) -> DenseOperator {
        rotation_matrix(&self.local_pauli(), self.theta)
    }

    pub fn key(&self) -> GateKey {
        GateKey::new(&self.pauli, self.theta)
    }
}

impl fmt::Debug for RotationGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R[{} {:?} {:.6}]", self.local_pauli(), self.qubits, self.theta)
    }
}

/// `e^{−iPθ}` as a dense matrix for a Hermitian Pauli `P`.
pub fn rotation_matrix(p: &PauliString, theta: f64) -> DenseOperator {
    let m = to_matrix(p).expect("rotation generator within cap");
    identity(m.nrows()) * c64(theta.cos(), 0.0) + m * c64(0.0, -theta.sin())
}

/// Resolution used when angles are compared or hashed.
pub const ANGLE_QUANTUM: f64 = 1e-9;

/// Gate type: generator plus canonical angle on a fixed grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateKey {
    pub pauli: String,
    pub angle_ticks: i64,
}

impl GateKey {
    pub fn new(pauli: &PauliString, theta: f64) -> Self {
        let (canon, _) = canonical_angle(theta);
        let mut ticks = (canon / ANGLE_QUANTUM).round() as i64;
        if ticks == (PI / ANGLE_QUANTUM).round() as i64 {
            ticks = 0;
        }
        GateKey { pauli: pauli.phase_free().to_string(), angle_ticks: ticks }
    }

    pub fn theta(&self) -> f64 {
        self.angle_ticks as f64 * ANGLE_QUANTUM
    }

    pub fn pauli(&self) -> PauliString {
        self.pauli.parse().expect("key holds valid Pauli text")
    }

    /// A stable 64-bit label, used to address random streams.
    pub fn label(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.pauli.bytes().chain(self.angle_ticks.to_le_bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layer {
    pub gates: Vec<RotationGate>,
}

impl Layer {
    pub fn new(gates: Vec<RotationGate>) -> Self {
        Layer { gates }
    }

    fn first_overlap(&self) -> Option<usize> {
        let mut seen = BTreeSet::new();
        for g in &self.gates {
            for &q in g.qubits() {
                if !seen.insert(q) {
                    return Some(q);
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub layers: Vec<Layer>,
}

impl Block {
    pub fn new(layers: Vec<Layer>) -> Self {
        Block { layers }
    }

    pub fn gates(&self) -> impl Iterator<Item = &RotationGate> {
        self.layers.iter().flat_map(|l| l.gates.iter())
    }
}

/// Default cap on layers per block.
pub const DEFAULT_BLOCK_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredCircuit {
    pub n: usize,
    pub blocks: Vec<Block>,
}

impl LayeredCircuit {
    pub fn new(n: usize) -> Self {
        LayeredCircuit { n, blocks: Vec::new() }
    }

    /// One layer per block.
    pub fn from_layers(n: usize, layers: Vec<Layer>) -> Self {
        LayeredCircuit { n, blocks: layers.into_iter().map(|l| Block::new(vec![l])).collect() }
    }

    pub fn push_layer(&mut self, layer: Layer) {
        self.blocks.push(Block::new(vec![layer]));
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.blocks.iter().flat_map(|b| b.layers.iter())
    }

    pub fn gates(&self) -> impl Iterator<Item = &RotationGate> {
        self.layers().flat_map(|l| l.gates.iter())
    }

    pub fn depth(&self) -> usize {
        self.layers().count()
    }

    pub fn gate_count(&self) -> usize {
        self.gates().count()
    }

    /// Same gate order, `per_block` layers per block (the last block may be shorter).
    pub fn reblock(&self, per_block: usize) -> Self {
        let layers: Vec<Layer> = self.layers().cloned().collect();
        let blocks = layers.chunks(per_block.max(1)).map(|c| Block::new(c.to_vec())).collect();
        LayeredCircuit { n: self.n, blocks }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        self.validate_with_cap(DEFAULT_BLOCK_CAP)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<(), CircuitError> {
        for (b, block) in self.blocks.iter().enumerate() {
            if block.layers.is_empty() {
                return Err(CircuitError::EmptyBlock(b));
            }
            if block.layers.len() > cap {
                return Err(CircuitError::BlockTooLong { block: b, layers: block.layers.len(), cap });
            }
            for (l, layer) in block.layers.iter().enumerate() {
                for g in &layer.gates {
                    if g.pauli().n() != self.n {
                        return Err(CircuitError::Pauli(PauliError::LengthMismatch(g.pauli().n(), self.n)));
                    }
                    let w = g.pauli().weight();
                    if !(1..=2).contains(&w) {
                        return Err(CircuitError::BadWeight(w));
                    }
                    if !(0.0..PI).contains(&g.theta()) {
                        return Err(CircuitError::BadAngle(g.theta()));
                    }
                }
                if let Some(qubit) = layer.first_overlap() {
                    return Err(CircuitError::Overlap { block: b, layer: l, qubit });
                }
            }
        }
        Ok(())
    }
}

/// Largest register `ideal_unitary` will expand.
pub const IDEAL_UNITARY_CAP: usize = 10;

/// Product of all gates, earliest first, as a `2ⁿ × 2ⁿ` matrix.
pub fn ideal_unitary(c: &LayeredCircuit) -> Result<DenseOperator, CircuitError> {
    if c.n > IDEAL_UNITARY_CAP {
        return Err(CircuitError::TooLarge(c.n, IDEAL_UNITARY_CAP));
    }
    let dim = 1usize << c.n;
    let ops: Vec<(PauliAction, f64)> = c.gates().map(|g| (PauliAction::new(g.pauli()), g.theta())).collect();
    let mut u = DenseOperator::zeros(dim, dim);
    let mut col = vec![c64(0.0, 0.0); dim];
    for j in 0..dim {
        col.iter_mut().for_each(|a| *a = c64(0.0, 0.0));
        col[j] = c64(1.0, 0.0);
        for (a, theta) in &ops {
            a.rotate(&mut col, *theta);
        }
        u.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    Ok(u)
}

/// Transverse-field Ising Trotter circuit: per step, ZZ on even bonds, ZZ on
/// odd bonds, then `Rx(φ) = e^{−iXφ/2}` on every site, one layer per block.
pub fn build_trotter_ising(
    n: usize,
    steps: usize,
    zz_angles: &[f64],
    x_angle: f64,
) -> Result<LayeredCircuit, CircuitError> {
    if n < 2 || steps == 0 {
        return Err(CircuitError::TrotterShape);
    }
    if zz_angles.len() != n - 1 {
        return Err(CircuitError::AngleCount { expected: n - 1, got: zz_angles.len() });
    }
    let mut c = LayeredCircuit::new(n);
    for _ in 0..steps {
        for parity in [0, 1] {
            let gates = (parity..n - 1)
                .step_by(2)
                .map(|b| RotationGate::on(n, "ZZ", &[b, b + 1], zz_angles[b]))
                .collect::<Result<Vec<_>, _>>()?;
            if !gates.is_empty() {
                c.push_layer(Layer::new(gates));
            }
        }
        let xs = (0..n).map(|q| RotationGate::on(n, "X", &[q], x_angle / 2.0)).collect::<Result<Vec<_>, _>>()?;
        c.push_layer(Layer::new(xs));
    }
    Ok(c)
}

/// Default transverse-field angle `φ`.
pub const DEFAULT_X_ANGLE: f64 = 0.1 * PI;

/// `c` followed by its inverse: reversed blocks and layers, negated angles.
pub fn compute_uncompute(c: &LayeredCircuit) -> LayeredCircuit {
    let mut out = c.clone();
    for block in c.blocks.iter().rev() {
        let layers = block
            .layers
            .iter()
            .rev()
            .map(|l| Layer::new(l.gates.iter().map(|g| g.with_theta(-g.theta())).collect()))
            .collect();
        out.blocks.push(Block::new(layers));
    }
    out
}

/// Line-oriented text form:
///
/// ```text
/// qubits 2
/// block 0
/// layer
/// gate ZZ 0,1 0.392699
/// ```
pub fn to_text(c: &LayeredCircuit) -> String {
    let mut s = format!("qubits {}\n", c.n);
    for (b, block) in c.blocks.iter().enumerate() {
        s.push_str(&format!("block {b}\n"));
        for layer in &block.layers {
            s.push_str("layer\n");
            for g in &layer.gates {
                s.push_str(&gate_line(g));
            }
        }
    }
    s
}

pub(crate) fn gate_line(g: &RotationGate) -> String {
    let qs: Vec<String> = g.qubits().iter().map(|q| q.to_string()).collect();
    format!("gate {} {} {:.17e}\n", g.local_pauli(), qs.join(","), g.theta())
}

/// Parses [`to_text`] output. Lines starting with `#` and `ins` lines are skipped.
pub fn parse_text(text: &str) -> Result<LayeredCircuit, CircuitError> {
    let mut n: Option<usize> = None;
    let mut c = LayeredCircuit::new(0);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: &str| CircuitError::Syntax { line: i + 1, msg: msg.to_string() };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("qubits") => {
                let v = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad qubit count"))?;
                n = Some(v);
                c.n = v;
            }
            Some("block") => c.blocks.push(Block::default()),
            Some("layer") => {
                let block = c.blocks.last_mut().ok_or_else(|| err("layer before block"))?;
                block.layers.push(Layer::default());
            }
            Some("gate") => {
                let n = n.ok_or_else(|| err("gate before qubits"))?;
                let letters = parts.next().ok_or_else(|| err("missing Pauli"))?;
                let qubits = parts
                    .next()
                    .ok_or_else(|| err("missing qubits"))?
                    .split(',')
                    .map(|t| t.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| err("bad qubit list"))?;
                let theta: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad angle"))?;
                let gate = RotationGate::on(n, letters, &qubits, theta)?;
                let layer =
                    c.blocks.last_mut().and_then(|b| b.layers.last_mut()).ok_or_else(|| err("gate before layer"))?;
                layer.gates.push(gate);
            }
            Some("ins") => {}
            Some(other) => return Err(err(&format!("unknown directive {other:?}"))),
            None => {}
        }
    }
    if n.is_none() {
        return Err(CircuitError::Syntax { line: 0, msg: "missing qubits line".into() });
    }
    Ok(c)
}

/// Letter on qubit `q` of a gate, for callers that branch on the axis.
pub fn axis_of(g: &RotationGate) -> Option<Pauli1> {
    match g.qubits() {
        [q] => Some(g.pauli().get(*q)),
        _ => None,
    }
}
