//! `grassframe`: reproducible experiments on frames and neural collapse.
//!
//! Exit codes: 0 success, 2 invalid usage or input, 3 runtime failure.

mod commands;
mod failure;
mod manifest;
mod svg;

use std::process::ExitCode;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "grassframe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
