//! Dense complex matrices and the few decompositions the crate needs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type DenseOperator = DMatrix<Complex64>;

/// Largest register for which full `2ⁿ × 2ⁿ` operators are built.
pub const FULL_UNITARY_CAP: usize = 6;
/// Largest register for dense state vectors.
pub const STATE_VECTOR_CAP: usize = 12;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> DenseOperator {
    DenseOperator::identity(dim, dim)
}

pub fn is_unitary(u: &DenseOperator, tol: f64) -> bool {
    u.is_square() && (u.adjoint() * u - identity(u.nrows())).norm() <= tol
}

pub fn is_hermitian(h: &DenseOperator, tol: f64) -> bool {
    h.is_square() && (h - h.adjoint()).norm() <= tol
}

/// The real symmetric matrix `[[A, −B], [B, A]]` of `H = A + iB`. Its
/// spectrum is that of `H` with every eigenvalue doubled.
fn real_embedding(h: &DenseOperator) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &DenseOperator) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(real_embedding(h)).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals.into_iter().step_by(2).collect()
}

/// `e^{−i t H}` for Hermitian `H`, by scaling and squaring a Taylor series.
pub fn expm_hermitian(h: &DenseOperator, t: f64) -> DenseOperator {
    let dim = h.nrows();
    let scale = t.abs() * h.norm();
    let squarings = if scale > 0.5 { (scale / 0.5).log2().ceil() as u32 } else { 0 };
    let step = h * c64(0.0, -t / f64::powi(2.0, squarings as i32));
    let mut out = identity(dim);
    let mut term = identity(dim);
    for k in 1..40 {
        term = &term * &step * c64(1.0 / k as f64, 0.0);
        out += &term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Closest unitary to `m` in Frobenius norm, by the Newton iteration
/// `X ← (X + X^{−†})/2`. Returns `None` when `M` is numerically singular.
pub fn polar_unitary(m: &DenseOperator) -> Option<DenseOperator> {
    let min = hermitian_eigenvalues(&(m.adjoint() * m)).into_iter().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 1e-24 {
        return None;
    }
    let mut x = m.clone();
    for _ in 0..100 {
        let inv = x.clone().try_inverse()?;
        let next = (&x + inv.adjoint()) * c64(0.5, 0.0);
        let delta = (&next - &x).norm();
        x = next;
        if delta < 1e-15 * (x.nrows() as f64).sqrt() {
            break;
        }
    }
    Some(x)
}

/// Frobenius distance minimised over a global phase, normalised by `√dim`.
///
/// Equals `sqrt(2 − 2|tr(u†v)|/dim)` for unitaries, but is evaluated as an
/// explicit difference so that tiny distances keep full precision.
pub fn phase_free_distance(u: &DenseOperator, v: &DenseOperator) -> f64 {
    let dim = u.nrows() as f64;
    let overlap = (v.adjoint() * u).trace();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c64(1.0, 0.0) };
    (u - v * phase).norm() / dim.sqrt()
}
