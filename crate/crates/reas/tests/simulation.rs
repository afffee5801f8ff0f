//! Norm preservation and error-accumulation scaling of noisy runs.

mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reas::circuit::{ideal_unitary, GateKey, Layer, LayeredCircuit, RotationGate};
use reas::dress::{apply_corrections, dress};
use reas::noise::{CoherentNoiseSpec, EnvLayout, EnvNoiseSpec, NoiseModel, NoisePolicy};
use reas::pauli::PauliString;
use reas::rng::Seeder;
use reas::sim::{rms_error_uniform, run_plain, run_shot, StateVector};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn noisy_runs_preserve_the_norm(seed in any::<u64>(), layers in 1usize..=30, gamma in 1e-4f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_circuit(2, layers, 2, &mut rng);
        let layout = EnvLayout::new(2, 2);
        let noise = NoiseModel::Env(EnvNoiseSpec::new(layout, gamma));
        let d = dress(&c, &mut rng);
        let out = run_shot(&d, &noise, &StateVector::plus(layout), &Seeder::new(seed)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        let fixed = NoiseModel::Env(EnvNoiseSpec { computational: NoisePolicy::Fixed, ..EnvNoiseSpec::new(layout, gamma) });
        let plain = run_plain(&c, &BTreeMap::new(), &fixed, &StateVector::zero(layout), &Seeder::new(seed)).unwrap();
        prop_assert!((plain.norm() - 1.0).abs() < 1e-10);
    }
}

fn block() -> Vec<Layer> {
    [("ZY", 0.125), ("YZ", -0.125), ("XY", -0.125)]
        .iter()
        .map(|(l, t)| Layer::new(vec![RotationGate::on(2, l, &[0, 1], t * std::f64::consts::PI).unwrap()]))
        .collect()
}

fn repeated(b: usize) -> LayeredCircuit {
    LayeredCircuit::from_layers(2, (0..b).flat_map(|_| block()).collect())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn dressed_error_stays_inside_the_square_root_envelope() {
    let eps = 0.002;
    let draws = 200;
    let depths = [4usize, 8, 16, 32, 64, 128];
    let basis: Vec<&str> =
        ["IX", "IY", "IZ", "XI", "YI", "ZI", "XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"].to_vec();
    let obs: PauliString = "IZ".parse().unwrap();
    let layout = EnvLayout::new(2, 0);
    let init = StateVector::zero(layout);
    let (mut reas, mut plain) = (Vec::new(), Vec::new());
    for &b in &depths {
        let c = repeated(b);
        let u = ideal_unitary(&c).unwrap();
        let mut ideal = init.clone();
        ideal.apply_dense(&u).unwrap();
        let target = ideal.expectation(&obs).unwrap();
        let (mut xr, mut xp) = (Vec::new(), Vec::new());
        for m in 0..draws {
            let seeder = Seeder::new(5).child(m);
            let spec = CoherentNoiseSpec::physical_draws(c.gates(), &basis, &[2], eps, &seeder.child(0)).unwrap();
            let shifts: BTreeMap<GateKey, f64> =
                spec.gates.iter().map(|(k, e)| (k.clone(), e.twirled_shift(&k.pauli()))).collect();
            let noise = NoiseModel::Coherent(spec);
            let d = apply_corrections(&dress(&c, &mut seeder.child(1).rng_at(b as u64)), &shifts);
            xr.push(run_shot(&d, &noise, &init, &seeder).unwrap().expectation(&obs).unwrap());
            xp.push(run_plain(&c, &BTreeMap::new(), &noise, &init, &seeder).unwrap().expectation(&obs).unwrap());
        }
        reas.push(rms_error_uniform(target, &xr).unwrap());
        plain.push(rms_error_uniform(target, &xp).unwrap());
    }
    let xs: Vec<f64> = depths.iter().map(|&b| b as f64).collect();
    let envelope = |b: f64| 2.0 * (eps + b * eps * eps);
    let c_hat = reas.iter().zip(&xs).map(|(r, &b)| r * r / envelope(b)).fold(0.0, f64::max);
    let s_reas = slope(&xs, &reas);
    let s_plain = slope(&xs, &plain);
    assert!(s_reas < 0.65, "dressed slope {s_reas}");
    assert!(s_plain > 0.85, "undressed slope {s_plain}");
    let last = xs.len() - 1;
    assert!(plain[last] > (c_hat * envelope(xs[last])).sqrt(), "undressed run should leave the envelope");
}
