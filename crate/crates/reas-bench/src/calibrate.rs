//! Twirled against naive gate calibration over independent noise draws.

use anyhow::Result;
use reas::calibration::{estimate_gate_shift, theory_shift, CalibrationMode};
use reas::rng::Seeder;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::ExperimentConfig;
use crate::output::{Check, Row, ScenarioOutput, Summary};
use crate::scenarios::{fig2_block, fig2_noise};

pub const ACCURACY: f64 = 1e-4;
pub const SIGNIFICANCE: f64 = 0.05;

/// One-sided paired t-test of `mean(d) > 0`. Returns `(t, p)`.
pub fn paired_t_test(d: &[f64]) -> Option<(f64, f64)> {
    if d.len() < 2 {
        return None;
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Some(if mean > 0.0 { (f64::INFINITY, 0.0) } else { (f64::NAN, 1.0) });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).ok()?;
    Some((t, 1.0 - dist.cdf(t)))
}

/// Estimates every fig2 gate type with and without twirling for `cfg.samples`
/// noise draws and compares both against the first-order prediction.
pub fn run_calibration_study(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let noise = fig2_noise(cfg)?;
    let root = Seeder::new(cfg.seed);
    let block = fig2_block();
    let per_draw = crate::scenarios::par_map(cfg.samples, |d| {
        let seeder = root.child(d as u64);
        let noise_seeder = seeder.child(0);
        let mut rows = Vec::new();
        for (i, g) in block.iter().enumerate() {
            let theory = theory_shift(g, &noise, &noise_seeder)?;
            let draw_seeder = seeder.child(2).child(i as u64);
            let est = |mode| -> Result<f64> {
                let cal = crate::scenarios::calibration_config(cfg, mode);
                Ok(estimate_gate_shift(g, &noise, &cal, &noise_seeder, &draw_seeder)?.delta_theta)
            };
            let (reas, naive) = (est(CalibrationMode::Twirled)?, est(CalibrationMode::Naive)?);
            let x = i as f64;
            rows.push(Row::new("delta_theta", "theory", x, d, 0, theory));
            rows.push(Row::new("delta_theta", "reas", x, d, 0, reas));
            rows.push(Row::new("delta_theta", "naive", x, d, 0, naive));
            rows.push(Row::new("abs_error", "reas", x, d, 0, (reas - theory).abs()));
            rows.push(Row::new("abs_error", "naive", x, d, 0, (naive - theory).abs()));
        }
        Ok(rows)
    })?;
    let rows: Vec<Row> = per_draw.into_iter().flatten().collect();
    let mut summary = Summary::new(cfg, "calibration", &rows);
    let errors = |m: &str| {
        rows.iter().filter(|r| r.quantity == "abs_error" && r.method == m).map(|r| r.value).collect::<Vec<_>>()
    };
    let (reas, naive) = (errors("reas"), errors("naive"));
    let worst = reas.iter().cloned().fold(0.0, f64::max);
    summary.checks.push(Check::new(
        "reas-accuracy",
        worst < ACCURACY,
        format!("max |reas - theory| = {worst:.3e} rad over {} estimates", reas.len()),
    ));
    let diffs: Vec<f64> = naive.iter().zip(&reas).map(|(n, r)| n - r).collect();
    summary.checks.push(match paired_t_test(&diffs) {
        Some((t, p)) => Check::new(
            "reas-closer-than-naive",
            p < SIGNIFICANCE,
            format!("paired one-sided t = {t:.3}, p = {p:.3e} over {} pairs", diffs.len()),
        ),
        None => Check::new("reas-closer-than-naive", false, "too few pairs".into()),
    });
    summary.meta("gates", block.iter().map(|g| format!("{}({:.6})", g.pauli(), g.theta())).collect::<Vec<_>>());
    summary.meta("k_max", cfg.calibration.k_max);
    summary.meta("draws_per_k", cfg.calibration.draws_per_k);
    summary.meta("shots", cfg.calibration.shots);
    summary.meta("gamma", cfg.noise.gamma);
    summary.meta("bias", cfg.noise.bias);
    summary.meta("noise_draws", cfg.samples);
    Ok(ScenarioOutput { rows, summary })
}
