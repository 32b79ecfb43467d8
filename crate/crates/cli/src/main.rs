use std::process::ExitCode;

use clap::Parser;
use gfqi_cli::Cli;

fn main() -> ExitCode {
    ExitCode::from(gfqi_cli::run(&Cli::parse()))
}
