//! Experiment driver: validation suite, survival comparisons, conditional
//! statistics, event-probability trend sweeps, and closed-form evaluation.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration or
//! parameter error, 3 I/O error.

mod config;
mod output;
mod runs;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Resolved};

#[derive(Parser)]
#[command(name = "trapsim", version, about = "Brownian particle among moving Poissonian traps")]
struct Cli {
    /// TOML configuration file; flags below override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (default: out).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Kill-detection mode for direct simulation.
    #[arg(long, global = true, value_name = "naive|bridge")]
    mode: Option<String>,

    /// Jackknife-correct the convexity bias of the annealed weights.
    #[arg(long, global = true)]
    debias: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the oracle/validation suite and write a pass/fail report.
    Validate,
    /// Compare direct, annealed and lower-bound survival over the t grid.
    Survival,
    /// Conditional-on-survival statistics and the exponent fit.
    Conditional,
    /// Conditional vs unconditioned event-probability trends over the t grid.
    Trend,
    /// Evaluate one closed form: analytics <name> <args...>.
    Analytics {
        #[arg(trailing_var_arg = true)]
        query: Vec<String>,
    },
}

fn is_io_error(err: &anyhow::Error) -> bool {
    err.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let resolved = Resolved::new(cfg, cli.seed, cli.threads, cli.out, cli.mode, cli.debias)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if resolved.threads > 0 {
        pool = pool.num_threads(resolved.threads);
    }
    let pool = pool.build()?;

    // Analytics prints to stdout and touches no files.
    if let Command::Analytics { query } = &cli.command {
        runs::run_analytics(query)?;
        return Ok(ExitCode::SUCCESS);
    }

    let out_dir = resolved.output_dir.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| anyhow::Error::new(e).context("cannot create output directory"))?;

    let code = pool.install(|| -> Result<ExitCode> {
        match &cli.command {
            Command::Validate => {
                let ok = validate::run(&resolved, &out_dir)?;
                Ok(if ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
            Command::Survival => {
                runs::run_survival(&resolved, &out_dir)?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Conditional => {
                runs::run_conditional(&resolved, &out_dir)?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Trend => {
                runs::run_trend(&resolved, &out_dir)?;
                Ok(ExitCode::SUCCESS)
            }
            Command::Analytics { .. } => unreachable!("handled above"),
        }
    })?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_io_error(&err) {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
