//! `monret`: batch front-end for the monitored-return engines.
//!
//! Reads a JSON experiment config, dispatches to one of five subcommands,
//! and emits CSV/JSON artifacts. Exit codes: 0 success, 1 I/O failure,
//! 2 schema or argument violation, 3 resonance, 4 numerical-health failure.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "monret",
    version,
    about = "Return statistics of a quantum system monitored at random times"
)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// RNG seed for stochastic commands; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; default all cores, MONRET_THREADS as fallback.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact moment report and generating-function frequency sweep.
    Exact,
    /// Monte Carlo first-detection sampling: histogram and empirical moments.
    Sample,
    /// Detection-amplitude loops in the complex plane with winding numbers.
    Trajectory,
    /// Two-level fluctuation curves over a coupling grid.
    Fluctuations,
    /// Identity and normalization checks; nonzero exit on any failure.
    Verify,
}

/// Error carrying its process exit code.
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<monret::Error> for Failure {
    fn from(err: monret::Error) -> Self {
        use monret::Error as E;
        let code = match &err {
            E::InvalidModel(_)
            | E::NotHermitian { .. }
            | E::NotNormalized { .. }
            | E::EmptyAccessibleSpace
            | E::InvalidDistribution(_)
            | E::InvalidArgument(_) => 2,
            E::Resonance { .. } => 3,
            E::NumericalHealth(_)
            | E::UndefinedWinding(_)
            | E::UnderResolvedGrid(_)
            | E::Backend(_) => 4,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(&cli) {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    init_threads(cli.threads)?;
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Exact => commands::exact(&config, &cli.out, cli.quiet),
        Command::Sample => commands::sample(&config, &cli.out, cli.seed, cli.quiet),
        Command::Trajectory => commands::trajectory(&config, &cli.out, cli.seed, cli.quiet),
        Command::Fluctuations => commands::fluctuations(&config, &cli.out, cli.quiet),
        Command::Verify => commands::verify(&config, &cli.out, cli.quiet),
    }
}

fn init_threads(flag: Option<usize>) -> Result<(), Failure> {
    let count = match flag {
        Some(n) => Some(n),
        None => match std::env::var("MONRET_THREADS") {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| Failure {
                code: 2,
                message: format!("MONRET_THREADS must be a thread count, got {raw:?}"),
            })?),
            Err(_) => None,
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(count.unwrap_or(0))
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            message: format!("thread pool setup: {e}"),
        })
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let path = path.ok_or_else(|| Failure {
        code: 2,
        message: "--config PATH is required".into(),
    })?;
    let raw = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    serde_json::from_str(&raw).map_err(|e| Failure {
        code: 2,
        message: format!("config schema: {e}"),
    })
}
