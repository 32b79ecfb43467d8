//! Command-line front end: configuration loading, batch runs and check
//! suites with JSON and CSV reports.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{ConfigError, RunConfig};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gfqi", version, about = "Generating functions for contact Hamiltonian isotopies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV
    Flow(RunArgs),
    /// Sample the time-one image of the zero section, its front and spectrum
    Front(RunArgs),
    /// Check the generating function against the flow
    GenfunCheck(RunArgs),
    /// Check the action identities
    Validate(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output.dir`, default `out`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized probes
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Flow(a) | Command::Front(a) | Command::GenfunCheck(a) | Command::Validate(a) => a,
        }
    }
}

/// Runs one command inside a pool of `--jobs` workers.
pub fn execute(cmd: &Command) -> Result<Outcome> {
    let args = cmd.args();
    let cfg = RunConfig::load(&args.config)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let run = cfg.resolve()?;
    if args.jobs == Some(0) {
        return Err(ConfigError("--jobs must be at least 1".into()).into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()?;
    pool.install(|| match cmd {
        Command::Flow(_) => commands::cmd_flow(&run, &out),
        Command::Front(_) => commands::cmd_front(&run, args.seed, &out),
        Command::GenfunCheck(_) => commands::cmd_genfun_check(&run, args.seed, &out),
        Command::Validate(_) => commands::cmd_validate(&run, args.seed, &out),
    })
}

pub fn exit_code(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(Outcome::Pass) => EXIT_PASS,
        Ok(Outcome::Fail(_)) => EXIT_CHECK_FAILED,
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => EXIT_CONFIG,
        Err(_) => EXIT_NUMERIC,
    }
}

/// Executes and reports on stderr; returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let result = execute(&cli.command);
    match &result {
        Ok(Outcome::Pass) => {}
        Ok(Outcome::Fail(names)) => eprintln!("failed checks: {}", names.join(", ")),
        Err(e) => eprintln!("error: {e:#}"),
    }
    exit_code(&result)
}
