//! Per-round aggregation across trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::policies::Algorithm;

use super::runner::TrialResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub t: u64,
    pub mean_regret: f64,
    /// Population standard deviation across trials.
    pub std_regret: f64,
    pub mean_regret_over_sqrt_t: f64,
    /// Trials that reached round `t`.
    pub trials: usize,
}

/// Aggregates `(algorithm, trial, t, R_t)` points. Values are summed in
/// trial order, so the result does not depend on the input order.
pub fn aggregate_points(points: impl IntoIterator<Item = (Algorithm, u64, u64, f64)>) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Algorithm, u64), Vec<(u64, f64)>> = BTreeMap::new();
    for (algo, trial, t, regret) in points {
        groups.entry((algo, t)).or_default().push((trial, regret));
    }
    groups
        .into_iter()
        .map(|((algorithm, t), mut values)| {
            values.sort_by_key(|&(trial, _)| trial);
            let n = values.len() as f64;
            let mean = values.iter().map(|v| v.1).sum::<f64>() / n;
            let var = values.iter().map(|v| (v.1 - mean).powi(2)).sum::<f64>() / n;
            AggregateRow {
                algorithm,
                t,
                mean_regret: mean,
                std_regret: var.sqrt(),
                mean_regret_over_sqrt_t: mean / (t as f64).sqrt(),
                trials: values.len(),
            }
        })
        .collect()
}

pub fn aggregate(trials: &[TrialResult]) -> Vec<AggregateRow> {
    aggregate_points(trials.iter().flat_map(|trial| {
        let s = &trial.summary;
        trial
            .rows
            .iter()
            .map(move |r| (s.algorithm, s.trial, r.t, r.cumulative_regret))
    }))
}
