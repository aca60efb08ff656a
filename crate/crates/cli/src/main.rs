//! `coopsolve`: solve weighted voting games, generate datasets, train and
//! evaluate payoff networks, run sweeps, the EU Council case study and the
//! feature-attribution pipeline.
//!
//! Exit codes: 0 success, 2 argument or configuration error, 3 solver or
//! capacity error, 4 I/O error.

mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<coopsolve_core::Error>() {
        Some(e) if e.is_io_error() => 4,
        Some(e) if e.is_solver_error() => 3,
        _ if err.downcast_ref::<std::io::Error>().is_some() => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
