#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use reas::circuit::{Layer, LayeredCircuit, RotationGate};

const LETTERS: [char; 3] = ['X', 'Y', 'Z'];

/// A layer of weight-1 and weight-2 rotations on disjoint random qubits.
pub fn random_layer<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Layer {
    let mut free: Vec<usize> = (0..n).collect();
    let mut gates = Vec::new();
    while !free.is_empty() && (gates.is_empty() || rng.gen_bool(0.5)) {
        let a = free.swap_remove(rng.gen_range(0..free.len()));
        let theta = rng.gen_range(-PI..PI);
        if !free.is_empty() && rng.gen_bool(0.5) {
            let b = free.swap_remove(rng.gen_range(0..free.len()));
            let l: String = (0..2).map(|_| LETTERS[rng.gen_range(0..3)]).collect();
            gates.push(RotationGate::on(n, &l, &[a, b], theta).unwrap());
        } else {
            let l = LETTERS[rng.gen_range(0..3)].to_string();
            gates.push(RotationGate::on(n, &l, &[a], theta).unwrap());
        }
    }
    Layer::new(gates)
}

/// `layers` random layers grouped `per_block` to a block.
pub fn random_circuit<R: Rng + ?Sized>(n: usize, layers: usize, per_block: usize, rng: &mut R) -> LayeredCircuit {
    let layers = (0..layers).map(|_| random_layer(n, rng)).collect();
    LayeredCircuit::from_layers(n, layers).reblock(per_block)
}
