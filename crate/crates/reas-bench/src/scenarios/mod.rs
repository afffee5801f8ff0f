//! Scenario runners. Each returns per-draw rows plus a summary with fits
//! and self-checks; all randomness is addressed through the master seed, so
//! outputs do not depend on the worker count.

mod appendix_d;
pub(crate) mod depth;
mod random;
mod trotter;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ScenarioId};
use crate::output::ScenarioOutput;

pub use appendix_d::run_appendix_d;
pub(crate) use depth::calibration_config;
pub use depth::{fig2_block, fig2_circuit, fig2_noise, run_fig2};
pub use random::{random_circuit, run_fig3, run_fig4, spt_error_ratio, ANGLES};
pub use trotter::{run_trotter, trotter_circuit};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

/// Validates `cfg` and runs its scenario on the current rayon pool.
pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput, BenchError> {
    cfg.validate()?;
    let out = match cfg.scenario {
        ScenarioId::Fig2DepthScaling => run_fig2(cfg)?,
        ScenarioId::Fig3GammaScaling => run_fig3(cfg)?,
        ScenarioId::Fig4Spt => run_fig4(cfg)?,
        ScenarioId::AppendixD => run_appendix_d(cfg)?,
        ScenarioId::TrotterIsing => run_trotter(cfg)?,
    };
    Ok(out)
}

/// `f(0) … f(n−1)` on the pool, results in index order.
pub(crate) fn par_map<T: Send>(
    n: usize,
    f: impl Fn(usize) -> anyhow::Result<T> + Sync + Send,
) -> anyhow::Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}
