//! Short runs with every invariant monitor switched on.

use serde::Serialize;

use crate::environment::Setting;
use crate::error::Result;
use crate::policies::Algorithm;

use super::config::ExperimentConfig;
use super::runner::{run_experiment, TrialSummary};

pub const CHECK_HORIZON: u64 = 2000;
const CHECK_TRIALS: u64 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub setting: Setting,
    pub trials: Vec<TrialSummary>,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Algorithms that apply to `setting`.
pub fn applicable_algorithms(setting: Setting) -> Vec<Algorithm> {
    let finite = matches!(
        setting,
        Setting::FiniteStar | Setting::FiniteStarPd | Setting::ConvexBoxStar
    );
    Algorithm::ALL
        .into_iter()
        .filter(|&a| a != Algorithm::SafePe || finite)
        .collect()
}

pub fn check_setting(setting: Setting, master_seed: u64) -> Result<CheckReport> {
    let mut config = ExperimentConfig::new(setting, CHECK_HORIZON, CHECK_TRIALS);
    config.master_seed = master_seed;
    config.algorithms = applicable_algorithms(setting);
    config.log_stride = CHECK_HORIZON;
    let result = run_experiment(&config)?;

    let mut failures = Vec::new();
    for trial in &result.trials {
        let s = &trial.summary;
        let tag = format!("{} trial {}", s.algorithm, s.trial);
        if let Some(failure) = &s.invariant_failure {
            failures.push(format!("{tag}: {failure}"));
        }
        if s.equivalence_mismatches > 0 {
            failures.push(format!(
                "{tag}: κ-form selector disagreed in {} rounds",
                s.equivalence_mismatches
            ));
        }
    }
    Ok(CheckReport {
        setting,
        trials: result.trials.into_iter().map(|t| t.summary).collect(),
        failures,
    })
}
