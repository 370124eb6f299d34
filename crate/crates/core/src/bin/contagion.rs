use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use contagion_core::config::parse_config;
use contagion_core::run::{self, Command, RunError};

/// Credit contagion scenarios: finite-N simulation, limit equation, Gaussian loss approximation.
#[derive(Debug, Parser)]
#[command(name = "contagion", version)]
struct Cli {
    /// Subcommand to run.
    #[arg(value_enum)]
    command: Command,
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV and manifest files.
    #[arg(long)]
    out: PathBuf,
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|source| RunError::Io {
        path: cli.config.clone(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    let threads = run::threads_from_env()?;
    let manifest = run::run_with_threads(cli.command, &cfg, &cli.out, threads)?;
    for f in &manifest.outputs {
        println!("{}", cli.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
