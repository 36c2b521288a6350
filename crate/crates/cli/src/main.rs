//! `g3m`: scenario configs in, CSV tables out.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

mod commands;
mod config;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use g3m_core::G3mError;

use commands::{FigureName, Overrides};
use config::Config;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn from_core(e: G3mError) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Validation(e.to_string())
        }
    }

    pub fn context(self, field: &str) -> Self {
        match self {
            Self::Validation(m) => Self::Validation(format!("{field}: {m}")),
            Self::Numerical(m) => Self::Numerical(format!("{field}: {m}")),
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self::Validation(format!("i/o: {e}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "invalid input: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "g3m", version, about = "Geometric mean market maker experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Clamp replicating weights to [0, 1] instead of refusing.
    #[arg(long, global = true)]
    clamp_weights: bool,
    /// Worker threads for Monte Carlo; all available cores when omitted.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form and Monte Carlo LP prices per scenario.
    Price,
    /// Re-weighted pool trajectory along one simulated path.
    Simulate,
    /// Hedge test of a replicating pool over simulated paths.
    Replicate,
    /// Figure data grids.
    Figure {
        #[arg(value_enum)]
        name: FigureName,
    },
}

fn run(cli: &Cli) -> Result<Vec<u8>, CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None if matches!(cli.command, Command::Figure { .. }) => Config::default(),
        None => return Err(CliError::Validation("--config is required".into())),
    };
    if cli.clamp_weights && !matches!(cli.command, Command::Replicate) {
        return Err(CliError::Validation("--clamp-weights applies to `replicate` only".into()));
    }
    let ov = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        steps: cli.steps,
        clamp_weights: cli.clamp_weights,
    };
    match &cli.command {
        Command::Price => commands::price(&cfg, &ov),
        Command::Simulate => commands::simulate(&cfg, &ov),
        Command::Replicate => commands::replicate(&cfg, &ov),
        Command::Figure { name } => commands::figure(*name, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: invalid input: --workers must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| run(&cli)),
        Err(e) => Err(CliError::Validation(format!("thread pool: {e}"))),
    };
    let bytes = match result {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
