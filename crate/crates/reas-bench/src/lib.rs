//! Experiment runner for REAS benchmarks: scenario configs, sweeps, fits
//! and CSV/JSON reporting.

pub mod calibrate;
pub mod config;
pub mod fit;
pub mod output;
pub mod scenarios;
pub mod table;
