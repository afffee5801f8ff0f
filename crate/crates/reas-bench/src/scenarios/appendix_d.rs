//! First-order error coefficients of randomized compiling and REAS on the
//! single-qubit `S`/`T` family, plus sampled trace distances.

use anyhow::Result;
use reas::rc::{
    rc_closed_form_coefficient, rc_first_order_coefficient, reas_first_order_coefficient, rms_trace_distance, Method,
};
use reas::rng::Seeder;

use super::par_map;
use crate::config::ExperimentConfig;
use crate::output::{find, Check, Row, ScenarioOutput, Summary};

pub const CLOSED_FORM_DEPTHS: [usize; 5] = [1, 2, 3, 4, 8];
pub const CLOSED_FORM_RTOL: f64 = 1e-3;
pub const ZERO_ATOL: f64 = 1e-6;
pub const REAS_SPREAD: (usize, usize, f64) = (4, 16, 0.25);

fn coefficient_rows(l: usize) -> Result<Vec<Row>> {
    let x = l as f64;
    Ok(vec![
        Row::new("first_order_coefficient", "rc", x, 0, 0, rc_first_order_coefficient(l)?),
        Row::new("first_order_coefficient", "rc-closed-form", x, 0, 0, rc_closed_form_coefficient(l)),
        Row::new("first_order_coefficient", "reas", x, 0, 0, reas_first_order_coefficient(l)?),
    ])
}

pub fn run_appendix_d(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let mut depths = cfg.sweep.depths.clone();
    for l in CLOSED_FORM_DEPTHS.iter().chain([REAS_SPREAD.0, REAS_SPREAD.1].iter()) {
        if !depths.contains(l) {
            depths.push(*l);
        }
    }
    depths.sort_unstable();
    let mut rows: Vec<Row> = par_map(depths.len(), |i| coefficient_rows(depths[i]))?.into_iter().flatten().collect();
    let root = Seeder::new(cfg.seed);
    if !cfg.sweep.rms_depths.is_empty() {
        let eps = cfg.epsilon()?;
        let jobs: Vec<(usize, Method)> =
            cfg.sweep.rms_depths.iter().flat_map(|&l| [(l, Method::Rc), (l, Method::Reas)]).collect();
        let values = par_map(jobs.len(), |i| {
            let (l, m) = jobs[i];
            let seeder = root.child(l as u64).child(i as u64 % 2);
            Ok(rms_trace_distance(m, l, eps, cfg.samples, &seeder)?)
        })?;
        for ((l, m), v) in jobs.iter().zip(values) {
            rows.push(Row::new("rms_trace_distance", m.label(), *l as f64, 0, 0, v));
        }
    }
    let mut summary = Summary::new(cfg, cfg.scenario.name(), &rows);
    let coef = |method: &str, l: usize| {
        find(&summary.aggregates, "first_order_coefficient", method, l as f64).map(|a| a.mean).unwrap_or(f64::NAN)
    };
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for &l in &CLOSED_FORM_DEPTHS {
        let (got, want) = (coef("rc", l), rc_closed_form_coefficient(l));
        let err = (got - want).abs();
        let pass = if want == 0.0 { err < ZERO_ATOL } else { err / want.abs() < CLOSED_FORM_RTOL };
        ok &= pass;
        worst = worst.max(if want == 0.0 { err } else { err / want.abs() });
    }
    let mut checks = vec![Check::new(
        "rc-closed-form",
        ok,
        format!("worst relative deviation {worst:.2e} over L in {CLOSED_FORM_DEPTHS:?}"),
    )];
    let (lo, hi, tol) = REAS_SPREAD;
    let (a, b) = (coef("reas", lo), coef("reas", hi));
    let spread = (b - a).abs() / a.abs().max(b.abs());
    checks.push(Check::new(
        "reas-coefficient-bounded",
        spread < tol,
        format!("reas coefficient {a:.4} at L={lo}, {b:.4} at L={hi}, relative change {spread:.3}"),
    ));
    if let Some(&l) = cfg.sweep.rms_depths.iter().max() {
        let rms = |m: Method| {
            find(&summary.aggregates, "rms_trace_distance", m.label(), l as f64).map_or(f64::NAN, |a| a.mean)
        };
        let (rc, reas) = (rms(Method::Rc), rms(Method::Reas));
        checks.push(Check::new("reas-below-rc", reas < rc, format!("L={l}: reas {reas:.3e}, rc {rc:.3e}")));
    }
    summary.checks = checks;
    summary.meta("input_state", "|+>");
    summary.meta("epsilon", cfg.noise.epsilon);
    summary.meta("averaging", "exact transfer recursion over all twirls");
    summary.meta("rms_samples", cfg.samples);
    Ok(ScenarioOutput { rows, summary })
}
