//! Experiment harness CLI: run replicated smoothing experiments from a
//! TOML config and post-process the result files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smcsmooth::bench::{
    hybrid_growth_report, io::read_results, run_experiment_to_file, summarize_file, tail_report,
    ExperimentConfig, SEED_ENV_VAR,
};

#[derive(Parser)]
#[command(name = "smcsmooth", about = "Particle smoothing experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write a results CSV.
    Run {
        /// TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Master seed (SMCSMOOTH_SEED overrides this).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output results file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads for replicate-level parallelism.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Aggregate a results file into a JSON summary.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Start of the slope-fit window (defaults to horizon / 5).
        #[arg(long)]
        slope_from: Option<usize>,
        /// End of the slope-fit window (defaults to the horizon).
        #[arg(long)]
        slope_to: Option<usize>,
    },
    /// Tail diagnostics of rejection cost at one time step.
    Tails {
        #[arg(long = "in")]
        input: PathBuf,
        /// Time step to analyse (the first backward step by default).
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Optional output path; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Growth of the hybrid sampler's cost over a grid of particle counts.
    HybridGrowth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional output path; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn effective_seed(cli_seed: u64) -> u64 {
    match std::env::var(SEED_ENV_VAR) {
        Ok(value) => value.parse().unwrap_or_else(|_| {
            eprintln!("warning: ignoring unparsable {SEED_ENV_VAR}={value}");
            cli_seed
        }),
        Err(_) => cli_seed,
    }
}

fn emit(json: &str, out: Option<&PathBuf>) -> smcsmooth::Result<()> {
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn run(cli: Cli) -> smcsmooth::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = effective_seed(seed);
            run_experiment_to_file(&config, seed, workers.max(1), &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Summarize {
            input,
            out,
            slope_from,
            slope_to,
        } => {
            let window = match (slope_from, slope_to) {
                (Some(a), Some(b)) => Some((a, b)),
                (Some(a), None) => Some((a, usize::MAX)),
                _ => None,
            };
            let summary = summarize_file(&input, &out, window)?;
            eprintln!(
                "wrote {} (slope over [{}, {}]: {:?})",
                out.display(),
                summary.slope.from_t,
                summary.slope.to_t,
                summary.slope.slope
            );
        }
        Command::Tails { input, t, out } => {
            let (meta, records) = read_results(&input)?;
            let report = tail_report(&records, &meta, t)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| smcsmooth::SmcError::Config(e.to_string()))?;
            emit(&json, out.as_ref())?;
        }
        Command::HybridGrowth { config, seed, out } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = effective_seed(seed);
            let report = hybrid_growth_report(&config, seed)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| smcsmooth::SmcError::Config(e.to_string()))?;
            emit(&json, out.as_ref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
