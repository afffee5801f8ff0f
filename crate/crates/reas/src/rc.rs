//! Randomized-compiling baseline on the single-qubit `S`/`T` family.
//!
//! The ideal circuit is `S^{L+1}T^L` with `S = diag(1, i)` and
//! `T = diag(1, e^{iπ/4})`. Only gates proportional to `Z` carry an error,
//! `U → U·polar(I + iεZ)`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::circuit::{Layer, LayeredCircuit, RotationGate};
use crate::dress::{dress, DressedCircuit};
use crate::linalg::{c64, identity, polar_unitary, DenseOperator};
use crate::pauli::{to_matrix, Pauli1, PauliString};
use crate::rng::Seeder;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcError {
    #[error("depth must be at least 1")]
    EmptyDepth,
}

pub fn s_gate() -> DenseOperator {
    DenseOperator::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 1.0)]))
}

pub fn t_gate() -> DenseOperator {
    DenseOperator::from_diagonal(&nalgebra::DVector::from_vec(vec![
        c64(1.0, 0.0),
        Complex64::from_polar(1.0, FRAC_PI_4),
    ]))
}

fn pauli1(l: Pauli1) -> DenseOperator {
    to_matrix(&PauliString::from_letters(&[l])).expect("single-qubit Pauli")
}

fn z() -> DenseOperator {
    pauli1(Pauli1::Z)
}

fn power(m: &DenseOperator, k: usize) -> DenseOperator {
    (0..k).fold(identity(m.nrows()), |acc, _| acc * m)
}

/// `S^{L+1}T^L`.
pub fn ideal_st(l: usize) -> DenseOperator {
    power(&s_gate(), l + 1) * power(&t_gate(), l)
}

/// `Z` when `u` is proportional to `Z`, else nothing.
pub fn error_function(u: &DenseOperator) -> Option<DenseOperator> {
    let overlap = (z().adjoint() * u).trace().norm() / 2.0;
    ((overlap - 1.0).abs() < 1e-9).then(z)
}

/// `u·polar(I + iε g)`, or `u` when `g` is absent.
pub fn with_error(u: &DenseOperator, g: Option<DenseOperator>, eps: f64) -> DenseOperator {
    match g {
        None => u.clone(),
        Some(g) => u * polar_unitary(&(identity(2) + g * c64(0.0, eps))).expect("I + iεZ is invertible"),
    }
}

/// A randomly compiled instance: twirls `σ_{j_1} … σ_{j_L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcCircuit {
    pub l: usize,
    pub draws: Vec<Pauli1>,
}

pub fn rc_compile<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Result<RcCircuit, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let draws = (0..l).map(|_| Pauli1::ALL[rng.gen_range(0..4)]).collect();
    Ok(RcCircuit { l, draws })
}

/// `C̃_k` for `k ≥ 2`: `σ_{j_k} S T σ_{j_{k−1}} T†`, with `σ_{j_{L+1}} = I`.
fn merged(current: Pauli1, previous: Pauli1) -> DenseOperator {
    let t = t_gate();
    pauli1(current) * s_gate() * &t * pauli1(previous) * t.adjoint()
}

impl RcCircuit {
    pub fn new(draws: Vec<Pauli1>) -> Result<Self, RcError> {
        if draws.is_empty() {
            return Err(RcError::EmptyDepth);
        }
        Ok(RcCircuit { l: draws.len(), draws })
    }

    /// Merged easy gates `C̃_1 … C̃_{L+1}`.
    pub fn merged_gates(&self) -> Vec<DenseOperator> {
        let mut out = vec![pauli1(self.draws[0]) * s_gate()];
        for k in 1..self.l {
            out.push(merged(self.draws[k], self.draws[k - 1]));
        }
        out.push(merged(Pauli1::I, self.draws[self.l - 1]));
        out
    }

    /// `C̃_{L+1} T C̃_L ⋯ T C̃_1` with errors. The first merged gate carries
    /// the error of its twirl factor `σ_{j_1}`.
    pub fn unitary(&self, eps: f64) -> DenseOperator {
        let t = t_gate();
        let gates = self.merged_gates();
        let mut u = with_error(&gates[0], error_function(&pauli1(self.draws[0])), eps);
        for c in &gates[1..] {
            u = with_error(c, error_function(c), eps) * &t * u;
        }
        u
    }
}

/// `E[U]` over all twirls, by a transfer recursion on the last draw.
pub fn rc_mean_unitary(l: usize, eps: f64) -> Result<DenseOperator, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let t = t_gate();
    let mut m: Vec<DenseOperator> = Pauli1::ALL
        .iter()
        .map(|&j| with_error(&(pauli1(j) * s_gate()), error_function(&pauli1(j)), eps) * c64(0.25, 0.0))
        .collect();
    for _ in 1..l {
        m = Pauli1::ALL
            .iter()
            .map(|&j| {
                Pauli1::ALL.iter().zip(&m).fold(DenseOperator::zeros(2, 2), |acc, (&i, mi)| {
                    let c = merged(j, i);
                    acc + with_error(&c, error_function(&c), eps) * &t * mi * c64(0.25, 0.0)
                })
            })
            .collect();
    }
    Ok(Pauli1::ALL.iter().zip(&m).fold(DenseOperator::zeros(2, 2), |acc, (&i, mi)| {
        let c = merged(Pauli1::I, i);
        acc + with_error(&c, error_function(&c), eps) * &t * mi
    }))
}

fn all_draws(len: usize) -> impl Iterator<Item = Vec<Pauli1>> {
    (0..4usize.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let l = Pauli1::ALL[code % 4];
                code /= 4;
                l
            })
            .collect()
    })
}

/// `E[U]` by enumerating all `4^L` twirl strings.
pub fn rc_mean_unitary_exhaustive(l: usize, eps: f64) -> Result<DenseOperator, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let count = 4f64.powi(l as i32);
    let sum = all_draws(l).fold(DenseOperator::zeros(2, 2), |acc, d| acc + RcCircuit { l, draws: d }.unitary(eps));
    Ok(sum / c64(count, 0.0))
}

/// Closed-form first-order operator `(1/4 − (L−1)/8)·S^{L+1}T^L Z`.
pub fn rc_first_order_operator(l: usize) -> DenseOperator {
    ideal_st(l) * z() * c64(rc_closed_form_coefficient(l), 0.0)
}

pub fn rc_closed_form_coefficient(l: usize) -> f64 {
    0.25 - (l as f64 - 1.0) / 8.0
}

/// Coefficient of `S^{L+1}T^L Z` in the ε-linear term of `E[U]`, from
/// `(E[U] − U₀)/(iε)` at two strengths with Richardson extrapolation.
pub fn first_order_coefficient(mean: impl Fn(f64) -> DenseOperator, u0: &DenseOperator, eps: (f64, f64)) -> (f64, f64) {
    let basis = u0 * z();
    let coef = |e: f64| {
        let a = (mean(e) - u0) / c64(0.0, e);
        (basis.adjoint() * a).trace().re / 2.0
    };
    let (c1, c2) = (coef(eps.0), coef(eps.1));
    let ratio = eps.0 / eps.1;
    ((ratio * c2 - c1) / (ratio - 1.0), (c1 - c2).abs())
}

/// Default strengths for the slope extraction.
pub const SLOPE_EPS: (f64, f64) = (1e-4, 1e-5);

pub fn rc_first_order_coefficient(l: usize) -> Result<f64, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    Ok(first_order_coefficient(|e| rc_mean_unitary(l, e).expect("l ≥ 1"), &ideal_st(l), SLOPE_EPS).0)
}

/// The family as `2L+1` single-qubit `Z` rotations, `π/4` and `π/8`
/// alternating, one per block.
pub fn st_circuit(l: usize) -> Result<LayeredCircuit, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let layers = (0..2 * l + 1)
        .map(|k| {
            let theta = if k % 2 == 0 { FRAC_PI_4 } else { FRAC_PI_8 };
            Layer::new(vec![RotationGate::on(1, "Z", &[0], theta).expect("valid rotation")])
        })
        .collect();
    Ok(LayeredCircuit::from_layers(1, layers).reblock(1))
}

pub fn reas_on_st_circuit<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Result<DressedCircuit, RcError> {
    Ok(dress(&st_circuit(l)?, rng))
}

fn rotation_z(sign: f64, theta: f64) -> DenseOperator {
    DenseOperator::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::from_polar(1.0, -sign * theta),
        Complex64::from_polar(1.0, sign * theta),
    ]))
}

fn letter(p: &PauliString) -> Pauli1 {
    p.get(0)
}

/// Inserted gate between draws `a` (earlier) and `b`, with its phase.
fn inserted(b: Pauli1, a: Pauli1) -> DenseOperator {
    pauli1(b) * pauli1(a)
}

fn sign_of(draw: Pauli1) -> f64 {
    if matches!(draw, Pauli1::X | Pauli1::Y) {
        -1.0
    } else {
        1.0
    }
}

fn nominal_angle(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        FRAC_PI_4
    } else {
        FRAC_PI_8
    }
}

/// `S^{L+1}T^L` as the product of `e^{−iθZ}` rotations, which differs from
/// [`ideal_st`] by a global phase.
pub fn ideal_rotations(l: usize) -> DenseOperator {
    (0..2 * l + 1).fold(identity(2), |acc, k| rotation_z(1.0, nominal_angle(k)) * acc)
}

/// Noisy product of a REAS instance given its draws, with `e^{∓iθZ}` kept
/// in the `sθ` form so the noiseless product is exactly [`ideal_rotations`].
pub fn reas_unitary_from_draws(draws: &[Pauli1], eps: f64) -> DenseOperator {
    let ins = |m: DenseOperator| with_error(&m, error_function(&m), eps);
    let mut u = ins(pauli1(draws[0]));
    for (k, &d) in draws.iter().enumerate() {
        if k > 0 {
            u = ins(inserted(d, draws[k - 1])) * u;
        }
        u = rotation_z(sign_of(d), nominal_angle(k)) * u;
    }
    ins(pauli1(draws[draws.len() - 1])) * u
}

pub fn reas_unitary(d: &DressedCircuit, eps: f64) -> DenseOperator {
    let draws: Vec<Pauli1> = d.draws.iter().map(letter).collect();
    reas_unitary_from_draws(&draws, eps)
}

/// `E[U]` for REAS on the family, by a transfer recursion on the last draw.
pub fn reas_mean_unitary(l: usize, eps: f64) -> Result<DenseOperator, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let ins = |m: DenseOperator| with_error(&m, error_function(&m), eps);
    let mut m: Vec<DenseOperator> = Pauli1::ALL
        .iter()
        .map(|&j| rotation_z(sign_of(j), nominal_angle(0)) * ins(pauli1(j)) * c64(0.25, 0.0))
        .collect();
    for k in 1..2 * l + 1 {
        m = Pauli1::ALL
            .iter()
            .map(|&j| {
                Pauli1::ALL.iter().zip(&m).fold(DenseOperator::zeros(2, 2), |acc, (&i, mi)| {
                    acc + rotation_z(sign_of(j), nominal_angle(k)) * ins(inserted(j, i)) * mi * c64(0.25, 0.0)
                })
            })
            .collect();
    }
    Ok(Pauli1::ALL.iter().zip(&m).fold(DenseOperator::zeros(2, 2), |acc, (&i, mi)| acc + ins(pauli1(i)) * mi))
}

/// `E[U]` for REAS by enumerating all `4^{2L+1}` draws.
pub fn reas_mean_unitary_exhaustive(l: usize, eps: f64) -> Result<DenseOperator, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let len = 2 * l + 1;
    let count = 4f64.powi(len as i32);
    let sum = all_draws(len).fold(DenseOperator::zeros(2, 2), |acc, d| acc + reas_unitary_from_draws(&d, eps));
    Ok(sum / c64(count, 0.0))
}

pub fn reas_first_order_coefficient(l: usize) -> Result<f64, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    Ok(first_order_coefficient(|e| reas_mean_unitary(l, e).expect("l ≥ 1"), &ideal_rotations(l), SLOPE_EPS).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Rc,
    Reas,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rc => "rc",
            Method::Reas => "reas",
        }
    }
}

/// RMS over random instances of the trace distance between the noisy and
/// ideal outputs for the input `|+⟩`.
pub fn rms_trace_distance(method: Method, l: usize, eps: f64, samples: usize, seeder: &Seeder) -> Result<f64, RcError> {
    if l == 0 {
        return Err(RcError::EmptyDepth);
    }
    let h = 0.5f64.sqrt();
    let plus = nalgebra::DVector::from_vec(vec![c64(h, 0.0), c64(h, 0.0)]);
    let ideal = ideal_st(l) * &plus;
    let mut sq = 0.0;
    for s in 0..samples {
        let mut rng = seeder.rng_at(s as u64);
        let u = match method {
            Method::Rc => rc_compile(l, &mut rng)?.unitary(eps),
            Method::Reas => reas_unitary(&reas_on_st_circuit(l, &mut rng)?, eps),
        };
        let out = u * &plus;
        let overlap = (ideal.adjoint() * out)[(0, 0)].norm_sqr();
        // Pure states: ½‖ρ − σ‖₁ = sqrt(1 − |⟨a|b⟩|²).
        sq += (1.0 - overlap).max(0.0);
    }
    Ok((sq / samples.max(1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::phase_free_distance;
    use crate::rng::substream;

    #[test]
    fn gates_match_rotations_up_to_phase() {
        assert!(phase_free_distance(&ideal_rotations(3), &ideal_st(3)) < 1e-14);
        let zr = |t: f64| rotation_z(1.0, t);
        assert!(phase_free_distance(&s_gate(), &zr(FRAC_PI_4)) < 1e-15);
        assert!(phase_free_distance(&t_gate(), &zr(FRAC_PI_8)) < 1e-15);
        assert!(error_function(&(z() * c64(0.0, 1.0))).is_some());
        assert!(error_function(&s_gate()).is_none());
        assert!(error_function(&identity(2)).is_none());
    }

    #[test]
    fn identity_twirls_reduce_to_the_plain_pattern() {
        let c = RcCircuit::new(vec![Pauli1::I; 3]).unwrap();
        let gates = c.merged_gates();
        assert!((&gates[0] - s_gate()).norm() < 1e-15);
        for g in &gates[1..] {
            assert!((g - s_gate()).norm() < 1e-15);
        }
    }

    #[test]
    fn noiseless_instances_are_ideal() {
        let mut rng = substream(1, &[0]);
        for l in 1..8 {
            for _ in 0..10 {
                let c = rc_compile(l, &mut rng).unwrap();
                assert!((c.unitary(0.0) - ideal_st(l)).norm() < 1e-13);
                let d = reas_on_st_circuit(l, &mut rng).unwrap();
                assert_eq!(d.inserted.len(), 2 * l + 2);
                assert!((reas_unitary(&d, 0.0) - ideal_rotations(l)).norm() < 1e-13);
                assert!(phase_free_distance(&d.noiseless_unitary().unwrap(), &ideal_st(l)) < 1e-13);
            }
        }
    }

    #[test]
    fn mean_channel_is_ideal_without_noise() {
        // Exhaustive average of U ρ U† over the 16 draws at L = 2.
        let rho = DenseOperator::from_row_slice(2, 2, &[c64(0.7, 0.0), c64(0.1, 0.2), c64(0.1, -0.2), c64(0.3, 0.0)]);
        let u0 = ideal_st(2);
        let want = &u0 * &rho * u0.adjoint();
        let mut avg = DenseOperator::zeros(2, 2);
        for d in all_draws(2) {
            let u = RcCircuit::new(d).unwrap().unitary(0.0);
            avg += &u * &rho * u.adjoint() / c64(16.0, 0.0);
        }
        assert!((avg - want).norm() < 1e-14);
    }

    #[test]
    fn transfer_recursion_matches_enumeration() {
        for l in 1..5 {
            for eps in [0.0, 1e-2, 0.3] {
                assert!(
                    (rc_mean_unitary(l, eps).unwrap() - rc_mean_unitary_exhaustive(l, eps).unwrap()).norm() < 1e-13
                );
            }
        }
        for l in 1..4 {
            for eps in [0.0, 1e-2, 0.3] {
                let d = (reas_mean_unitary(l, eps).unwrap() - reas_mean_unitary_exhaustive(l, eps).unwrap()).norm();
                assert!(d < 1e-11, "{l} {eps} {d}");
            }
        }
    }

    #[test]
    fn rc_coefficient_matches_closed_form() {
        assert_eq!(rc_closed_form_coefficient(1), 0.25);
        assert_eq!(rc_closed_form_coefficient(3), 0.0);
        assert_eq!(rc_closed_form_coefficient(9), -0.75);
        for l in [1, 2, 3, 4, 8, 9] {
            let c = rc_first_order_coefficient(l).unwrap();
            let want = rc_closed_form_coefficient(l);
            assert!((c - want).abs() <= 1e-3 * want.abs().max(1e-3), "L = {l}: {c} vs {want}");
            let a = rc_first_order_operator(l);
            assert!(((ideal_st(l) * z()).adjoint() * a).trace().re / 2.0 - want < 1e-15);
        }
    }

    #[test]
    fn exhaustive_slope_agrees_with_transfer() {
        let (c, _) = first_order_coefficient(|e| rc_mean_unitary_exhaustive(4, e).unwrap(), &ideal_st(4), SLOPE_EPS);
        assert!((c - rc_closed_form_coefficient(4)).abs() < 1e-6);
    }

    #[test]
    fn reas_coefficient_does_not_grow_with_depth() {
        let c4 = reas_first_order_coefficient(4).unwrap();
        let c16 = reas_first_order_coefficient(16).unwrap();
        assert!((c4 - 0.5).abs() < 1e-6, "{c4}");
        assert!(((c16 - c4) / c4).abs() < 0.25);
    }

    #[test]
    fn rms_distance_is_zero_without_noise_and_reas_wins_deep() {
        let seeder = Seeder::new(3);
        assert!(rms_trace_distance(Method::Rc, 5, 0.0, 20, &seeder).unwrap() < 1e-7);
        assert!(rms_trace_distance(Method::Reas, 5, 0.0, 20, &seeder).unwrap() < 1e-7);
        let rc = rms_trace_distance(Method::Rc, 128, 1e-2, 200, &seeder).unwrap();
        let reas = rms_trace_distance(Method::Reas, 128, 1e-2, 200, &seeder).unwrap();
        assert!(reas < rc, "{reas} vs {rc}");
    }
}
