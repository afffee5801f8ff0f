//! Linear growth of the randomized-compiling error against the flat dressed one.

use reas::rc::{
    rc_closed_form_coefficient, rc_first_order_coefficient, reas_first_order_coefficient, rms_trace_distance, Method,
};
use reas::rng::Seeder;

#[test]
fn rc_grows_linearly_while_dressing_stays_bounded() {
    let beta = 1.0 / 32.0;
    let alpha = 1.0;
    for l in [2usize, 4, 8, 16] {
        let rc = rc_first_order_coefficient(l).unwrap();
        let dressed = reas_first_order_coefficient(l).unwrap();
        assert!((rc - rc_closed_form_coefficient(l)).abs() < 1e-3 * rc.abs().max(1e-3));
        assert!(rc.abs() >= beta * l as f64, "L = {l}: {rc}");
        assert!(dressed.abs() <= alpha, "L = {l}: {dressed}");
    }
}

#[test]
fn dressed_trace_distance_is_lower_at_depth() {
    let seeder = Seeder::new(8);
    let rc = rms_trace_distance(Method::Rc, 64, 0.01, 200, &seeder).unwrap();
    let reas = rms_trace_distance(Method::Reas, 64, 0.01, 200, &seeder).unwrap();
    assert!(reas < rc, "reas {reas} rc {rc}");
}
