use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tfhj_cli::{run, RunConfig, Subcommand};

/// Time-fractional Hamilton–Jacobi laboratory.
#[derive(Debug, Parser)]
#[command(name = "tfhj", version)]
struct Cli {
    /// Subcommand to run.
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (`key=value`, `hamiltonian.amplitude=0.5`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(cli.config.as_deref(), &cli.set, Some(cli.subcommand)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
