//! `eetsim`: config-driven experiment runner.
//!
//! Verbs: `run <config.json>`, `compare <a.csv> <b.csv> --tol <x>`,
//! `sweep <config.json> --m 50,100,500`, `cost --sites N --k K --depth D`.
//! Exit codes: 0 success, 2 config error, 3 solver failure, 4 comparison
//! failure. `EETSIM_OUT_DIR` sets the default output directory; every run
//! is deterministic for a fixed config and master seed, whatever
//! `--threads` says.

mod compare;
mod config;
mod error;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eetsim::exec::{self, RunMode};
use eetsim::io;

use crate::config::TypedParams;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "eetsim",
    version,
    about = "Exciton-transfer simulation experiments on a qubit register"
)]
struct Cli {
    /// Cap on worker threads; results are identical for any cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory; wins over the config file and EETSIM_OUT_DIR.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare two CSV series column-by-column against a tolerance.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Max absolute deviation allowed over all shared columns.
        #[arg(long)]
        tol: f64,
    },
    /// Sweep ensemble sizes for a dynamics config.
    Sweep {
        config: PathBuf,
        /// Comma-separated ensemble sizes, e.g. --m 50,100,500.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        /// Output directory; wins over the config file and EETSIM_OUT_DIR.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the hierarchy cost table for truncation depths 0..=DEPTH.
    Cost {
        /// Levels in the register.
        #[arg(long)]
        sites: usize,
        /// Bath exponentials per level.
        #[arg(long)]
        k: usize,
        /// Largest truncation depth to tabulate.
        #[arg(long)]
        depth: usize,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config, out_dir } => {
            let cfg = config::load(&config, out_dir.as_deref(), None)?;
            let outcome = exec::with_thread_cap(cli.threads, || {
                experiments::run_experiment(&cfg, RunMode::default())
            })?;
            report(&outcome);
            Ok(outcome.exit_code as u8)
        }
        Command::Compare { a, b, tol } => {
            let ta = io::read_table(&a)
                .map_err(|e| CliError::Config(format!("{}: {e}", a.display())))?;
            let tb = io::read_table(&b)
                .map_err(|e| CliError::Config(format!("{}: {e}", b.display())))?;
            let report = compare::compare_tables(&ta, &tb, tol)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report)
                    .expect("report has no non-finite members by construction")
            );
            if report.pass {
                Ok(0)
            } else {
                Err(CliError::Comparison(format!(
                    "max deviation {:.6e} exceeds tolerance {:.6e}",
                    report.max_abs_deviation, report.tolerance
                )))
            }
        }
        Command::Sweep { config, m, out_dir } => {
            let cfg = config::load(&config, out_dir.as_deref(), Some(&m))?;
            if !matches!(cfg.params, TypedParams::Sweep(..)) {
                return Err(CliError::Config(format!(
                    "sweep needs a dynamics config, got kind {}",
                    cfg.kind.name()
                )));
            }
            let outcome = exec::with_thread_cap(cli.threads, || {
                experiments::run_experiment(&cfg, RunMode::default())
            })?;
            report(&outcome);
            Ok(outcome.exit_code as u8)
        }
        Command::Cost { sites, k, depth } => {
            if sites == 0 || k == 0 {
                return Err(CliError::Config("sites and k must be at least 1".into()));
            }
            print!("{}", experiments::cost_table_text(sites, k, depth));
            Ok(0)
        }
    }
}

fn report(outcome: &experiments::RunOutcome) {
    for line in &outcome.lines {
        println!("{line}");
    }
    println!("artifacts in {}:", outcome.out_dir.display());
    for f in &outcome.artifacts {
        println!("  {f}");
    }
}
