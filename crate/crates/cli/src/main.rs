//! `noiseprints` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::config::{RunConfig, UsageError};

pub const EXIT_ACCEPT: u8 = 0;
pub const EXIT_REJECT: u8 = 1;
pub const EXIT_UNRESOLVED: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

const THREADS_ENV: &str = "NOISEPRINTS_THREADS";

/// Seed-derived content fingerprints: derivation, calibration, verification,
/// disputes, robustness evaluation and emulated proofs.
///
/// Exit codes: 0 success, accept or winner A; 1 reject or winner B;
/// 2 unresolved; 3 usage error; 4 runtime error.
/// NOISEPRINTS_THREADS caps worker threads (0 = one per CPU).
#[derive(Debug, Parser)]
#[command(name = "noiseprints", version)]
struct Cli {
    /// Print a single JSON object on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// TOML file with defaults (tau, dim, fpr_log2, chunk_count, field_config, registry).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: commands::Command,
}

/// Result of one subcommand.
pub struct Report {
    pub json: serde_json::Value,
    pub text: String,
    pub code: u8,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| config::usage(format!("{THREADS_ENV} must be a non-negative integer, got '{raw}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Report> {
    configure_threads()?;
    let cfg = RunConfig::load(cli.config.as_deref())?;
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(report) => {
            if json {
                println!("{}", report.json);
            } else {
                print!("{}", report.text);
            }
            ExitCode::from(report.code)
        }
        Err(e) => {
            let code = if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            };
            eprintln!("error: {e:#}");
            if code == EXIT_USAGE {
                eprintln!("\nFor more information, try '--help'.");
            }
            if json {
                println!("{}", serde_json::json!({ "error": format!("{e:#}"), "exit_code": code }));
            }
            ExitCode::from(code)
        }
    }
}
