//! `inspect`: solve for optimal inspection policies, verify them with the
//! oracles, simulate them, and sweep parameters for plot data.

mod commands;
mod config;
mod exit;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Command, Flags, RunConfig};
use exit::{CliError, BAD_CONFIG};

#[derive(Parser)]
#[command(name = "inspect", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Optimal policy as JSON.
    Solve(Flags),
    /// Oracle checks of a policy (or of the solved one) as JSON.
    Verify(Flags),
    /// Monte Carlo estimate of cost and agent payoff as JSON.
    Simulate(Flags),
    /// Curve data over a parameter grid as CSV.
    Sweep(Flags),
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (command, flags) = match cli.command {
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Sweep(f) => (Command::Sweep, f),
    };
    let cfg = RunConfig::load(command, &flags)?;
    let out = match command {
        Command::Solve => commands::run_solve(&cfg)?,
        Command::Verify => commands::run_verify(&cfg)?,
        Command::Simulate => commands::run_simulate(&cfg)?,
        Command::Sweep => commands::run_sweep(&cfg)?,
    };
    commands::emit(&cfg, &out)?;
    Ok(out.code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("INSPECT_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { BAD_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(detail) = e.detail {
                eprintln!("{detail}");
            }
            ExitCode::from(e.code as u8)
        }
    }
}
