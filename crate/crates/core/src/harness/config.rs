//! Experiment configuration.
//!
//! Configs are JSON objects; every field has a key, omitted keys take the
//! defaults below and unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{InstanceConfig, Setting};
use crate::error::{Error, Result};
use crate::policies::{Algorithm, PolicyOptions};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_LOG_STRIDE: u64 = 10;

/// Optional per-algorithm overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmOptions {
    /// κ for OPLB / Safe-LTS, the cap for C-ROFUL.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Reward gap Δ for the PD wrappers; defaults to the instance's true gap.
    #[serde(default)]
    pub reward_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    /// Action dimension; the setting's default when absent.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Constraint rows; the setting's default when absent.
    #[serde(default)]
    pub rows: Option<usize>,
    pub horizon: u64,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Direction-grid size for continuous action sets; ignored for finite ones.
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub algorithm_options: BTreeMap<Algorithm, AlgorithmOptions>,
    #[serde(default = "default_log_stride")]
    pub log_stride: u64,
    #[serde(default = "default_checks")]
    pub invariant_checks: bool,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_lambda() -> f64 {
    1.0
}

fn default_rho() -> f64 {
    0.1
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Roful]
}

fn default_log_stride() -> u64 {
    DEFAULT_LOG_STRIDE
}

fn default_checks() -> bool {
    true
}

impl ExperimentConfig {
    /// A config with every default filled in.
    pub fn new(setting: Setting, horizon: u64, trials: u64) -> Self {
        Self {
            setting,
            dim: None,
            rows: None,
            horizon,
            trials,
            master_seed: 0,
            delta: DEFAULT_DELTA,
            lambda: default_lambda(),
            rho: default_rho(),
            grid_size: None,
            algorithms: default_algorithms(),
            algorithm_options: BTreeMap::new(),
            log_stride: DEFAULT_LOG_STRIDE,
            invariant_checks: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon < 1 {
            return fail("horizon must be at least 1".into());
        }
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be at least 1, got {}", self.lambda));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return fail(format!("rho must be nonnegative, got {}", self.rho));
        }
        if self.log_stride < 1 {
            return fail("log_stride must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return fail("at least one algorithm is required".into());
        }
        if self.grid_size == Some(0) {
            return fail("grid_size must be positive".into());
        }
        let finite = matches!(
            self.setting,
            Setting::FiniteStar | Setting::FiniteStarPd | Setting::ConvexBoxStar
        );
        if self.algorithms.contains(&Algorithm::SafePe) && !finite {
            return fail(format!(
                "safe-pe needs a finite action set; `{}` is continuous",
                self.setting
            ));
        }
        for (algo, options) in &self.algorithm_options {
            if let Some(k) = options.kappa {
                if !(k >= 1.0 && k.is_finite()) {
                    return fail(format!("{algo}: kappa must be at least 1, got {k}"));
                }
            }
            if let Some(gap) = options.reward_gap {
                if !(gap > 0.0 && gap.is_finite()) {
                    return fail(format!("{algo}: reward_gap must be positive, got {gap}"));
                }
            }
        }
        Ok(())
    }

    pub fn instance_config(&self) -> InstanceConfig {
        let mut config = InstanceConfig::for_setting(self.setting);
        if let Some(dim) = self.dim {
            config.dim = dim;
        }
        if let Some(rows) = self.rows {
            config.rows = rows;
        }
        if let Some(size) = self.grid_size {
            config.grid_size = size;
        } else if config.dim > 2 {
            config.grid_size = crate::geometry::DEFAULT_GRID_HIGH_DIM;
        }
        config.noise_scale = self.rho;
        config
    }

    pub fn options_for(&self, algorithm: Algorithm) -> AlgorithmOptions {
        self.algorithm_options.get(&algorithm).copied().unwrap_or_default()
    }

    /// Policy options with the PD gap resolved against the true instance gap.
    pub(crate) fn policy_options(&self, algorithm: Algorithm, true_gap: f64) -> PolicyOptions {
        let options = self.options_for(algorithm);
        PolicyOptions {
            kappa: options.kappa,
            reward_gap: Some(options.reward_gap.unwrap_or(true_gap)),
        }
    }
}
