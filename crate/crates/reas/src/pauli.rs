//! n-qubit Pauli strings in symplectic form.
//!
//! Each qubit carries an `(x, z)` bit pair: `00 = I`, `10 = X`, `11 = Y`, `01 = Z`.
//! The operator is `i^phase · ⊗_q P_q` where `P_q` is the ordinary Pauli matrix,
//! so `Y` is stored as a single letter and never as `i·X·Z`.
//!
//! Qubit 0 is the leftmost character of the text form and the most significant
//! bit of a computational-basis index.

use std::fmt;
use std::ops::Neg;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{DenseOperator, FULL_UNITARY_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("length mismatch: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("invalid Pauli text {0:?}")]
    Parse(String),
    #[error("{0} qubits exceeds the dense-operator cap of {1}")]
    TooLarge(usize, usize),
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli1 {
    I,
    X,
    Y,
    Z,
}

impl Pauli1 {
    pub const ALL: [Pauli1; 4] = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z];

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli1::I => (false, false),
            Pauli1::X => (true, false),
            Pauli1::Y => (true, true),
            Pauli1::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli1::I,
            (true, false) => Pauli1::X,
            (true, true) => Pauli1::Y,
            (false, true) => Pauli1::Z,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli1::I => 'I',
            Pauli1::X => 'X',
            Pauli1::Y => 'Y',
            Pauli1::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli1::I),
            'X' => Some(Pauli1::X),
            'Y' => Some(Pauli1::Y),
            'Z' => Some(Pauli1::Z),
            _ => None,
        }
    }
}

/// Commutation sign `s ∈ {+1, −1}` between two Pauli strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_parity(odd: bool) -> Self {
        if odd {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_parity(self != rhs)
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self * Sign::Minus
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// Power of `i`, in `0..4`.
    phase: u8,
}

fn words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

fn parity(words_a: &[u64], words_b: &[u64]) -> u32 {
    words_a.iter().zip(words_b).map(|(a, b)| (a & b).count_ones()).sum()
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, x: vec![0; words(n)], z: vec![0; words(n)], phase: 0 }
    }

    pub fn from_letters(letters: &[Pauli1]) -> Self {
        let mut p = PauliString::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set(q, l);
        }
        p
    }

    /// A string on `n` qubits with the given letters at the given positions.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli1)]) -> Self {
        let mut p = PauliString::identity(n);
        for &(q, l) in ops {
            p.set(q, l);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn phase_factor(&self) -> Complex64 {
        match self.phase {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn phase_free(&self) -> Self {
        self.clone().with_phase(0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    pub fn get(&self, q: usize) -> Pauli1 {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (w, b) = (q / 64, q % 64);
        Pauli1::from_bits(self.x[w] >> b & 1 == 1, self.z[w] >> b & 1 == 1)
    }

    pub fn set(&mut self, q: usize, l: Pauli1) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
        let (w, b) = (q / 64, q % 64);
        let (xb, zb) = l.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((xb as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((zb as u64) << b);
    }

    pub fn letters(&self) -> Vec<Pauli1> {
        (0..self.n).map(|q| self.get(q)).collect()
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).map(|(x, z)| (x | z).count_ones() as usize).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q) != Pauli1::I).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// The same letters placed at `qubits` of an `n`-qubit register.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Self {
        assert_eq!(qubits.len(), self.n, "embedding needs one target per letter");
        let mut p = PauliString::identity(n).with_phase(self.phase);
        for (i, &q) in qubits.iter().enumerate() {
            p.set(q, self.get(i));
        }
        p
    }

    /// Letters at `qubits`, phase dropped.
    pub fn restrict(&self, qubits: &[usize]) -> Self {
        PauliString::from_letters(&qubits.iter().map(|&q| self.get(q)).collect::<Vec<_>>())
    }

    /// Bit masks over basis indices: qubit `q` maps to bit `n − 1 − q`.
    /// Only defined for `n ≤ 64`.
    pub fn index_masks(&self) -> (usize, usize) {
        assert!(self.n <= 64);
        let (mut xm, mut zm) = (0usize, 0usize);
        for q in 0..self.n {
            let (xb, zb) = self.get(q).bits();
            let bit = 1usize << (self.n - 1 - q);
            if xb {
                xm |= bit;
            }
            if zb {
                zm |= bit;
            }
        }
        (xm, zm)
    }

    /// Number of `Y` letters.
    pub fn y_count(&self) -> u32 {
        parity(&self.x, &self.z)
    }

    fn check_len(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(PauliError::LengthMismatch(self.n, other.n))
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        f.write_str(prefix)?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (phase, body) = if let Some(rest) = t.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = t.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = t.strip_prefix('+') {
            (0, rest)
        } else if let Some(rest) = t.strip_prefix('i') {
            (1, rest)
        } else {
            (0, t)
        };
        if body.is_empty() {
            return Err(PauliError::Parse(s.to_string()));
        }
        let letters = body
            .chars()
            .map(Pauli1::from_letter)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| PauliError::Parse(s.to_string()))?;
        Ok(PauliString::from_letters(&letters).with_phase(phase))
    }
}

/// `+1` iff `a` and `b` commute.
pub fn commutation_sign(a: &PauliString, b: &PauliString) -> Result<Sign, PauliError> {
    a.check_len(b)?;
    let odd = (parity(&a.x, &b.z) + parity(&a.z, &b.x)) % 2 == 1;
    Ok(Sign::from_parity(odd))
}

/// Matrix product `a · b`, phase included.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PauliString, PauliError> {
    a.check_len(b)?;
    // With P = i^{x·z} X^x Z^z per qubit, Z^{z1} X^{x2} = (−1)^{z1·x2} X^{x2} Z^{z1}.
    let x: Vec<u64> = a.x.iter().zip(&b.x).map(|(p, q)| p ^ q).collect();
    let z: Vec<u64> = a.z.iter().zip(&b.z).map(|(p, q)| p ^ q).collect();
    let pa = parity(&a.x, &a.z) as i64;
    let pb = parity(&b.x, &b.z) as i64;
    let pc = parity(&x, &z) as i64;
    let swap = parity(&a.z, &b.x) as i64;
    let phase = (a.phase as i64 + b.phase as i64 + pa + pb + 2 * swap - pc).rem_euclid(4) as u8;
    Ok(PauliString { n: a.n, x, z, phase })
}

/// The inserted gate between two consecutive draws: `v_k · v_j` with the phase discarded.
pub fn correlated_difference(v_j: &PauliString, v_k: &PauliString) -> Result<PauliString, PauliError> {
    Ok(multiply(v_k, v_j)?.with_phase(0))
}

/// Uniform draw over the `4ⁿ` phase-free strings.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PauliString {
    let mut p = PauliString::identity(n);
    for (w, (xw, zw)) in p.x.iter_mut().zip(p.z.iter_mut()).enumerate() {
        let bits = (n - 64 * w).min(64);
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        *xw = rng.gen::<u64>() & mask;
        *zw = rng.gen::<u64>() & mask;
    }
    p
}

/// Every phase-free string on `n` qubits, in lexicographic `IXYZ` order.
pub fn all_strings(n: usize) -> Vec<PauliString> {
    let mut out = Vec::with_capacity(1 << (2 * n));
    for code in 0..(1usize << (2 * n)) {
        let letters: Vec<Pauli1> = (0..n).map(|q| Pauli1::ALL[(code >> (2 * (n - 1 - q))) & 3]).collect();
        out.push(PauliString::from_letters(&letters));
    }
    out
}

/// Dense `2ⁿ × 2ⁿ` matrix `i^phase ⊗_q σ_q`.
pub fn to_matrix(p: &PauliString) -> Result<DenseOperator, PauliError> {
    if p.n > FULL_UNITARY_CAP {
        return Err(PauliError::TooLarge(p.n, FULL_UNITARY_CAP));
    }
    let dim = 1usize << p.n;
    let (xm, zm) = p.index_masks();
    let base = p.phase_factor() * Complex64::new(0.0, 1.0).powu(p.y_count());
    let mut m = DenseOperator::zeros(dim, dim);
    for col in 0..dim {
        let sign = if (zm & col).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        m[(col ^ xm, col)] = base * sign;
    }
    Ok(m)
}

/// A Pauli string compiled for repeated action on basis-indexed amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliAction {
    pub x_mask: usize,
    pub z_mask: usize,
    /// `i^phase · i^{#Y}`.
    pub base: Complex64,
}

impl PauliAction {
    pub fn new(p: &PauliString) -> Self {
        let (x_mask, z_mask) = p.index_masks();
        let base = p.phase_factor() * Complex64::new(0.0, 1.0).powu(p.y_count());
        PauliAction { x_mask, z_mask, base }
    }

    /// Coefficient in `P|b⟩ = c(b)|b ⊕ x⟩`.
    #[inline]
    pub fn coeff(&self, b: usize) -> Complex64 {
        if (b & self.z_mask).count_ones() & 1 == 1 {
            -self.base
        } else {
            self.base
        }
    }

    /// `dst += scale · P src`.
    pub fn accumulate(&self, src: &[Complex64], dst: &mut [Complex64], scale: Complex64) {
        for (b, &a) in src.iter().enumerate() {
            dst[b ^ self.x_mask] += scale * self.coeff(b) * a;
        }
    }

    /// `amps ← P amps`.
    pub fn apply(&self, amps: &mut [Complex64]) {
        if self.x_mask == 0 {
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= self.coeff(b);
            }
            return;
        }
        for b in 0..amps.len() {
            let c = b ^ self.x_mask;
            if b < c {
                let (ab, ac) = (amps[b], amps[c]);
                amps[c] = self.coeff(b) * ab;
                amps[b] = self.coeff(c) * ac;
            }
        }
    }

    /// `amps ← (cos θ − i sin θ P) amps`; equals `e^{−iPθ}` for Hermitian `P`.
    pub fn rotate(&self, amps: &mut [Complex64], theta: f64) {
        let (c, s) = (Complex64::new(theta.cos(), 0.0), Complex64::new(0.0, -theta.sin()));
        if self.x_mask == 0 {
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= c + s * self.coeff(b);
            }
            return;
        }
        for b in 0..amps.len() {
            let d = b ^ self.x_mask;
            if b < d {
                let (ab, ad) = (amps[b], amps[d]);
                amps[b] = c * ab + s * self.coeff(d) * ad;
                amps[d] = c * ad + s * self.coeff(b) * ab;
            }
        }
    }
}
