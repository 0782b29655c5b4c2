//! `slb`: run, sweep, check and export safe linear bandit experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slb_core::environment::Setting;
use slb_core::harness::{
    aggregate_rows, check_setting, read_trials_csv, run_experiment, write_aggregate_csv, write_json, write_run,
    ExperimentConfig, TRIALS_FILE,
};
use slb_core::policies::Algorithm;
use slb_core::Error;

#[derive(Parser)]
#[command(name = "slb", version, about = "Safe linear bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algorithms listed in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a config with its algorithm list replaced.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', required = true)]
        algos: Vec<String>,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Short runs with every invariant monitor on; exits 2 on a failure.
    Check {
        #[arg(long)]
        setting: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-export a run directory's per-round results.
    Export {
        /// Run directory containing trials.csv.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

fn run(config: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let result = run_experiment(config)?;
    write_run(out, config, &result)?;
    for algo in &config.algorithms {
        let finals: Vec<_> = result.trials.iter().filter(|t| t.summary.algorithm == *algo).collect();
        let mean = finals.iter().map(|t| t.summary.final_regret).sum::<f64>() / finals.len() as f64;
        let violations: u64 = finals.iter().map(|t| t.summary.violations).sum();
        println!("{algo}: mean final regret {mean:.4}, violations {violations}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn export(input: &Path, format: Format, out: &Path) -> Result<(), Error> {
    let rows = read_trials_csv(&input.join(TRIALS_FILE))?;
    let aggregate = aggregate_rows(&rows);
    match format {
        Format::Csv => write_aggregate_csv(out, &aggregate),
        Format::Json => write_json(out, &aggregate),
    }
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run { config, out } => {
            run(&ExperimentConfig::from_file(&config)?, &out)?;
        }
        Command::Sweep { config, algos, out } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            config.algorithms = algos.iter().map(|a| a.parse::<Algorithm>()).collect::<Result<_, _>>()?;
            config.validate()?;
            run(&config, &out)?;
        }
        Command::Check { setting, seed } => {
            let report = check_setting(setting.parse::<Setting>()?, seed)?;
            for trial in &report.trials {
                println!(
                    "{} trial {}: regret {:.4}, violations {}, confidence held {}",
                    trial.algorithm, trial.trial, trial.final_regret, trial.violations, trial.confidence_held
                );
            }
            if !report.passed() {
                for failure in &report.failures {
                    eprintln!("invariant failure: {failure}");
                }
                return Ok(ExitCode::from(EXIT_INVARIANT));
            }
            println!("all invariants hold");
        }
        Command::Export { input, format, out } => export(&input, format, &out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
