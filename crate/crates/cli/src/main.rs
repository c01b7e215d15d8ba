//! `mu0`: certified ball measures on the infinite-dimensional cube.
//!
//! Every command writes one JSON record (or a CSV table for sweeps) echoing
//! its inputs and the effective configuration. Exit codes: 0 success,
//! 1 precondition failure, 2 exhausted budget, 64 usage error.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Body, Command, Failure};
use config::{Format, RunConfig, CONFIG_ENV};

pub const EXIT_PRECONDITION: u8 = 1;
pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "mu0",
    version,
    about = "Certified ball measures on the infinite-dimensional cube"
)]
struct Cli {
    /// Key-value config file (falls back to $MU0_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Weight base of the metric
    #[arg(long, global = true)]
    base: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Precondition(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PRECONDITION)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BUDGET)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p).map_err(Failure::Precondition)?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.base {
        cfg.base = v;
    }
    if let Some(v) = cli.tol {
        cfg.tol = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if cli.output.is_some() {
        cfg.output = cli.output;
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    cfg.validate().map_err(Failure::Precondition)?;

    let outcome = commands::execute(&cli.command, &cfg)?;
    let text = match outcome.body {
        Body::Json(v) => {
            let mut s = serde_json::to_string_pretty(&v).expect("reports serialize");
            s.push('\n');
            s
        }
        Body::Csv(s) => s,
    };
    match &cfg.output {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Precondition(format!("cannot write {}: {e}", p.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Precondition(format!("cannot write report: {e}")))?;
        }
    }
    if let Some(msg) = &outcome.warning {
        eprintln!("warning: {msg}");
    }
    Ok(outcome.exit)
}
