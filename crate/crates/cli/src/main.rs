//! `pdchem`: run the decomposition pipelines on FCIDUMP inputs and write CSV.

mod commands;
mod config;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<pdchem::Error> for CliError {
    fn from(e: pdchem::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pdchem", version, about = "Problem-decomposition pipelines for FCIDUMP Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Restricted Hartree–Fock on the whole system.
    Scf(Flags),
    /// Single-shot density matrix embedding.
    Dmet(Flags),
    /// Fragment molecular orbital energy and pair corrections.
    Fmo(Flags),
    /// Divide-and-conquer Hartree–Fock.
    Dc(Flags),
    /// Variational eigensolver on the whole system.
    Vqe(Flags),
    /// Exact versus decomposed energies over a manifest of conformers.
    Rank(Flags),
    /// Bootstrap the effect of Gaussian energy noise on the correlations.
    SampleNoise(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// FCIDUMP file; for `rank` a manifest CSV, for `sample-noise` a records CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML file with per-module sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 or absent uses every core.
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (flags, cmd): (&Flags, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Scf(f) => (f, commands::cmd_scf),
        Command::Dmet(f) => (f, commands::cmd_dmet),
        Command::Fmo(f) => (f, commands::cmd_fmo),
        Command::Dc(f) => (f, commands::cmd_dc),
        Command::Vqe(f) => (f, commands::cmd_vqe),
        Command::Rank(f) => (f, commands::cmd_rank),
        Command::SampleNoise(f) => (f, commands::cmd_sample_noise),
    };
    let cfg = RunConfig::load(&Overrides {
        input: flags.input.clone(),
        config: flags.config.clone(),
        output: flags.output.clone(),
        seed: flags.seed,
        jobs: flags.jobs,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| cmd(&cfg))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
