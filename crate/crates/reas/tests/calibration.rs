//! Robust phase estimation on exact and repeated-gate data.

use proptest::prelude::*;
use reas::calibration::{rpe_estimate, wrap_angle, StageRecord};

fn exact(a: f64) -> impl FnMut(u32) -> Result<StageRecord, reas::calibration::CalibrationError> {
    move |k| {
        let x = k as f64 * a;
        Ok(StageRecord { p0: (1.0 + x.cos()) / 2.0, p_plus: (1.0 + x.sin()) / 2.0, samples: 0 })
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn exact_probabilities_give_the_exact_angle(a in -std::f64::consts::PI..std::f64::consts::PI, log_k in 0u32..=10) {
        let est = rpe_estimate(exact(a), 1 << log_k).unwrap();
        prop_assert!(wrap_angle(est.angle_hat - a).abs() < 1e-9);
        prop_assert!(!est.flagged);
    }

    #[test]
    fn bounded_stage_errors_are_tolerated(a in -3.0f64..3.0, noise in proptest::collection::vec(-0.1f64..0.1, 8)) {
        let mut stage = 0;
        let experiment = |k: u32| {
            let x = k as f64 * a + noise[stage];
            stage += 1;
            Ok(StageRecord { p0: (1.0 + x.cos()) / 2.0, p_plus: (1.0 + x.sin()) / 2.0, samples: 0 })
        };
        let est = rpe_estimate(experiment, 64).unwrap();
        prop_assert!(wrap_angle(est.angle_hat - a).abs() < 0.1 / 64.0 + 1e-12);
    }
}
