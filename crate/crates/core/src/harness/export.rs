//! CSV and JSON result files.
//!
//! Layout: UTF-8, comma separated, one header row, floats in scientific
//! notation with 17 significant digits so values round-trip exactly.
//! Undefined optional fields are written as empty cells.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::Algorithm;

use super::aggregate::{aggregate_points, AggregateRow};
use super::config::ExperimentConfig;
use super::runner::{ExperimentResult, TrialResult, TrialSummary};

pub const TRIALS_HEADER: [&str; 9] = [
    "algo",
    "trial",
    "t",
    "r_t",
    "R_t",
    "violation",
    "gamma",
    "width",
    "dir_index",
];
pub const AGGREGATE_HEADER: [&str; 5] = ["algo", "t", "mean_R", "std_R", "mean_R_over_sqrt_t"];

pub const TRIALS_FILE: &str = "trials.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One row of the per-round CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub algorithm: Algorithm,
    pub trial: u64,
    pub t: u64,
    pub regret: f64,
    pub cumulative_regret: f64,
    pub violation: bool,
    pub gamma: Option<f64>,
    pub width: Option<f64>,
    pub direction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialSummary>,
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn trial_rows(trials: &[TrialResult]) -> Vec<TrialRow> {
    trials
        .iter()
        .flat_map(|trial| {
            let s = &trial.summary;
            trial.rows.iter().map(move |r| TrialRow {
                algorithm: s.algorithm,
                trial: s.trial,
                t: r.t,
                regret: r.regret,
                cumulative_regret: r.cumulative_regret,
                violation: r.violation,
                gamma: r.gamma,
                width: r.width,
                direction: r.direction,
            })
        })
        .collect()
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(TRIALS_HEADER).map_err(|e| io_error(path, e))?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.trial.to_string(),
            r.t.to_string(),
            format_float(r.regret),
            format_float(r.cumulative_regret),
            u8::from(r.violation).to_string(),
            opt(r.gamma),
            opt(r.width),
            r.direction.map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.t.to_string(),
            format_float(r.mean_regret),
            format_float(r.std_regret),
            format_float(r.mean_regret_over_sqrt_t),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    let mut file = File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_error(path, e))?;
    file.write_all(b"\n").map_err(|e| io_error(path, e))
}

/// Writes `trials.csv`, `aggregate.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_trials_csv(&dir.join(TRIALS_FILE), &trial_rows(&result.trials))?;
    write_aggregate_csv(&dir.join(AGGREGATE_FILE), &result.aggregate)?;
    let summary = SummaryFile {
        config: config.clone(),
        trials: result.trials.iter().map(|t| t.summary.clone()).collect(),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, field: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::InvalidInput(format!("{}:{line}: bad {field} `{text}`", path.display())))
}

fn parse_opt<T: std::str::FromStr>(path: &Path, line: u64, field: &str, text: &str) -> Result<Option<T>> {
    if text.is_empty() {
        Ok(None)
    } else {
        parse(path, line, field, text).map(Some)
    }
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = reader.headers().map_err(|e| io_error(path, e))?;
    if header.iter().ne(TRIALS_HEADER) {
        return Err(Error::InvalidInput(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| io_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != TRIALS_HEADER.len() {
            return Err(Error::InvalidInput(format!(
                "{}:{line}: wrong field count",
                path.display()
            )));
        }
        let f = |i: usize| &record[i];
        let violation = match f(5) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::InvalidInput(format!(
                    "{}:{line}: bad violation `{other}`",
                    path.display()
                )))
            }
        };
        rows.push(TrialRow {
            algorithm: f(0).parse()?,
            trial: parse(path, line, "trial", f(1))?,
            t: parse(path, line, "t", f(2))?,
            regret: parse(path, line, "r_t", f(3))?,
            cumulative_regret: parse(path, line, "R_t", f(4))?,
            violation,
            gamma: parse_opt(path, line, "gamma", f(6))?,
            width: parse_opt(path, line, "width", f(7))?,
            direction: parse_opt(path, line, "dir_index", f(8))?,
        });
    }
    Ok(rows)
}

/// Recomputes the aggregate from per-round rows.
pub fn aggregate_rows(rows: &[TrialRow]) -> Vec<AggregateRow> {
    aggregate_points(rows.iter().map(|r| (r.algorithm, r.trial, r.t, r.cumulative_regret)))
}
