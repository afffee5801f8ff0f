//! Scenario configuration files.
//!
//! A config is a TOML document with a few top-level keys and nested
//! sections. Unknown keys are rejected so typos surface as config errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("{0} must not be empty")]
    EmptySweep(&'static str),
    #[error("sample count {0} is below 2")]
    TooFewSamples(usize),
    #[error("{field} = {value} is out of range")]
    Range { field: &'static str, value: f64 },
    #[error("missing `{0}` for this scenario")]
    Missing(&'static str),
    #[error("{n} qubits cannot be simulated (cap {cap})")]
    Infeasible { n: usize, cap: usize },
    #[error("bad observable `{0}`")]
    Observable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Fig2DepthScaling,
    Fig3GammaScaling,
    Fig4Spt,
    AppendixD,
    TrotterIsing,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::Fig2DepthScaling,
        ScenarioId::Fig3GammaScaling,
        ScenarioId::Fig4Spt,
        ScenarioId::AppendixD,
        ScenarioId::TrotterIsing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Fig2DepthScaling => "fig2-depth-scaling",
            ScenarioId::Fig3GammaScaling => "fig3-gamma-scaling",
            ScenarioId::Fig4Spt => "fig4-spt",
            ScenarioId::AppendixD => "appendix-d",
            ScenarioId::TrotterIsing => "trotter-ising",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| ConfigError::UnknownScenario(s.into()))
    }
}

/// How fig2 removes the first-order angle shift before dressing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionSource {
    /// Perturbative prediction from the drawn noise.
    #[default]
    Theory,
    /// Twirled phase-estimation calibration.
    Calibrated,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n_sys: usize,
    #[serde(default)]
    pub n_env: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Weight multiplier on each gate's own generator in fixed noise.
    pub bias: Option<f64>,
    #[serde(default)]
    pub correction: CorrectionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub b_values: Vec<usize>,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub steps: Vec<usize>,
    /// Depths for the closed-form coefficient comparison.
    #[serde(default)]
    pub depths: Vec<usize>,
    /// Depths for the sampled trace-distance comparison.
    #[serde(default)]
    pub rms_depths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub depth: usize,
    pub full_depth: Option<usize>,
    pub full_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Points with `x` below this are transient and left out of fits.
    #[serde(default = "default_min_x")]
    pub min_x: f64,
    /// A local slope below this marks saturation.
    #[serde(default = "default_knee_slope")]
    pub knee_slope: f64,
    /// Saturation also needs the value to reach this share of the maximum.
    #[serde(default = "default_knee_level")]
    pub knee_level: f64,
}

fn default_min_x() -> f64 {
    5.0
}

fn default_knee_slope() -> f64 {
    0.2
}

fn default_knee_level() -> f64 {
    0.5
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { min_x: default_min_x(), knee_slope: default_knee_slope(), knee_level: default_knee_level() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterSection {
    /// Twirl draws per noise realisation.
    pub twirl_draws: usize,
    #[serde(default = "default_x_angle")]
    pub x_angle: f64,
}

fn default_x_angle() -> f64 {
    reas::circuit::DEFAULT_X_ANGLE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_draws_per_k")]
    pub draws_per_k: usize,
    pub shots: Option<usize>,
}

fn default_k_max() -> u32 {
    64
}

fn default_draws_per_k() -> usize {
    400
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection { k_max: default_k_max(), draws_per_k: default_draws_per_k(), shots: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioId,
    pub seed: u64,
    /// Joint samples: each draws one noise realisation and one set of twirls.
    pub samples: usize,
    pub output: Option<PathBuf>,
    /// Full-register observable, identity on the environment.
    pub observable: Option<String>,
    pub system: SystemSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub circuit: Option<CircuitSection>,
    #[serde(default)]
    pub fit: FitSection,
    pub trotter: Option<TrotterSection>,
    #[serde(default)]
    pub calibration: CalibrationSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Restores the undiminished depth and sample count where the config names them.
    pub fn full_scale(mut self) -> Self {
        if let Some(c) = self.circuit.as_mut() {
            if let Some(d) = c.full_depth {
                c.depth = d;
            }
            if let Some(s) = c.full_samples {
                self.samples = s;
            }
        }
        self
    }

    pub fn gamma(&self) -> Result<f64, ConfigError> {
        self.noise.gamma.ok_or(ConfigError::Missing("noise.gamma"))
    }

    pub fn epsilon(&self) -> Result<f64, ConfigError> {
        self.noise.epsilon.ok_or(ConfigError::Missing("noise.epsilon"))
    }

    pub fn depth(&self) -> Result<usize, ConfigError> {
        self.circuit.as_ref().map(|c| c.depth).ok_or(ConfigError::Missing("circuit.depth"))
    }

    pub fn trotter(&self) -> Result<&TrotterSection, ConfigError> {
        self.trotter.as_ref().ok_or(ConfigError::Missing("trotter"))
    }

    /// The system part of the configured observable.
    pub fn system_observable(&self) -> Result<reas::pauli::PauliString, ConfigError> {
        let text = self.observable.as_deref().ok_or(ConfigError::Missing("observable"))?;
        let bad = || ConfigError::Observable(text.into());
        let full: reas::pauli::PauliString = text.parse().map_err(|_| bad())?;
        let total = self.system.n_sys + self.system.n_env;
        if full.n() != total && full.n() != self.system.n_sys {
            return Err(bad());
        }
        if (self.system.n_sys..full.n()).any(|q| full.get(q) != reas::pauli::Pauli1::I) {
            return Err(bad());
        }
        Ok(full.restrict(&(0..self.system.n_sys).collect::<Vec<_>>()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.samples < 2 {
            return Err(ConfigError::TooFewSamples(self.samples));
        }
        let total = self.system.n_sys + self.system.n_env;
        if self.system.n_sys == 0 || total > reas::linalg::STATE_VECTOR_CAP {
            return Err(ConfigError::Infeasible { n: total, cap: reas::linalg::STATE_VECTOR_CAP });
        }
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Range { field, value: v })
            }
        };
        let non_negative = |field: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Range { field, value: v })
            }
        };
        if let Some(g) = self.noise.gamma {
            non_negative("noise.gamma", g)?;
        }
        if let Some(e) = self.noise.epsilon {
            non_negative("noise.epsilon", e)?;
        }
        if let Some(b) = self.noise.bias {
            positive("noise.bias", b)?;
        }
        match self.scenario {
            ScenarioId::Fig2DepthScaling => {
                if self.sweep.b_values.is_empty() {
                    return Err(ConfigError::EmptySweep("sweep.b_values"));
                }
                if self.sweep.b_values.contains(&0) {
                    return Err(ConfigError::Range { field: "sweep.b_values", value: 0.0 });
                }
                self.gamma()?;
                self.system_observable()?;
                self.require_twirl_register(2)?;
            }
            ScenarioId::Fig3GammaScaling | ScenarioId::Fig4Spt => {
                if self.sweep.gammas.is_empty() {
                    return Err(ConfigError::EmptySweep("sweep.gammas"));
                }
                for &g in &self.sweep.gammas {
                    positive("sweep.gammas", g)?;
                }
                if self.depth()? == 0 {
                    return Err(ConfigError::Range { field: "circuit.depth", value: 0.0 });
                }
                self.require_twirl_register(2)?;
                if total > reas::linalg::FULL_UNITARY_CAP {
                    return Err(ConfigError::Infeasible { n: total, cap: reas::linalg::FULL_UNITARY_CAP });
                }
            }
            ScenarioId::AppendixD => {
                if self.sweep.depths.is_empty() {
                    return Err(ConfigError::EmptySweep("sweep.depths"));
                }
                if self.sweep.depths.contains(&0) || self.sweep.rms_depths.contains(&0) {
                    return Err(ConfigError::Range { field: "sweep.depths", value: 0.0 });
                }
                if !self.sweep.rms_depths.is_empty() {
                    self.epsilon()?;
                }
            }
            ScenarioId::TrotterIsing => {
                if self.sweep.steps.is_empty() {
                    return Err(ConfigError::EmptySweep("sweep.steps"));
                }
                if self.sweep.steps.contains(&0) {
                    return Err(ConfigError::Range { field: "sweep.steps", value: 0.0 });
                }
                self.epsilon()?;
                if self.system.n_sys < 2 || self.system.n_env != 0 {
                    return Err(ConfigError::Infeasible { n: total, cap: reas::linalg::STATE_VECTOR_CAP });
                }
                if self.trotter()?.twirl_draws == 0 {
                    return Err(ConfigError::Range { field: "trotter.twirl_draws", value: 0.0 });
                }
            }
        }
        Ok(())
    }

    fn require_twirl_register(&self, n_sys: usize) -> Result<(), ConfigError> {
        if self.system.n_sys != n_sys {
            return Err(ConfigError::Range { field: "system.n_sys", value: self.system.n_sys as f64 });
        }
        Ok(())
    }
}
