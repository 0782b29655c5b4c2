//! Experiment orchestration: seeded trials, invariant monitors, aggregation
//! and result files.
//!
//! Trials are independent: trial `i` samples its instance, noise and policy
//! randomness from separate streams keyed by `(master_seed, i)`, so every
//! algorithm in a run faces the same instance and the same noise sequence.

mod aggregate;
mod check;
mod config;
mod export;
mod runner;

pub use aggregate::{aggregate, aggregate_points, AggregateRow};
pub use check::{applicable_algorithms, check_setting, CheckReport, CHECK_HORIZON};
pub use config::{AlgorithmOptions, ExperimentConfig, DEFAULT_DELTA, DEFAULT_LOG_STRIDE};
pub use export::{
    aggregate_rows, format_float, read_trials_csv, trial_rows, write_aggregate_csv, write_json, write_run,
    write_trials_csv, SummaryFile, TrialRow, AGGREGATE_FILE, AGGREGATE_HEADER, SUMMARY_FILE, TRIALS_FILE,
    TRIALS_HEADER,
};
pub use runner::{
    run_experiment, run_trial, trial_instance, ExperimentResult, RoundRecord, TrialResult, TrialSummary, INVARIANT_TOL,
};
