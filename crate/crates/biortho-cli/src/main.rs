//! `biortho`: Fredholm determinants, kernels and Monte Carlo cross-checks
//! for biorthogonal measures from the command line.
//!
//! Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 numerical
//! failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Flags, RunConfig};
use crate::output::Record;

#[derive(Parser)]
#[command(name = "biortho", version, about = "Kernels, Fredholm determinants and Monte Carlo oracles for biorthogonal measures")]
struct Cli {
    /// Configuration file with [model], [numeric], [mc], [sweep] and [output] sections of key = value lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Polymer Laplace transform E[exp(−e^t Z)] = μ_N[σ_t] by every applicable representation
    Laplace(Flags),
    /// Matrix-model gap probability P(largest point ≤ s) for each --t
    Gap(Flags),
    /// Trace, reproducing, biorthogonality, consensus and log-derivative checks
    Check(Flags),
    /// Fredholm value against Monte Carlo; fails when |z| > 3
    McCompare(Flags),
    /// Zero-temperature sweep of a polymer towards its matrix-model limit
    Zerotemp(Flags),
    /// Tables of L_N, L̂_N, ψ_m, φ_m or the deformed one-point function
    Kernel(Flags),
    /// d/dt log μ_N[σ(· + t)] against central differences
    Logderiv(Flags),
}

type Runner = fn(&RunConfig, &mut Vec<Record>) -> biortho::Result<bool>;

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    let (name, flags, runner): (&str, Flags, Runner) = match cli.command {
        Command::Laplace(f) => ("laplace", f, commands::cmd_laplace),
        Command::Gap(f) => ("gap", f, commands::cmd_gap),
        Command::Check(f) => ("check", f, commands::cmd_check),
        Command::McCompare(f) => ("mc-compare", f, commands::cmd_mc_compare),
        Command::Zerotemp(f) => ("zerotemp", f, commands::cmd_zerotemp),
        Command::Kernel(f) => ("kernel", f, commands::cmd_kernel),
        Command::Logderiv(f) => ("logderiv", f, commands::cmd_logderiv),
    };
    let flags = match &cli.config {
        Some(p) => flags.or(Flags::from_config_file(p).map_err(|e| (2, e.to_string()))?),
        None => flags,
    };
    let cfg = RunConfig::resolve(name, &flags).map_err(|e| (2, e.to_string()))?;
    if let Some(n) = flags.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (2, format!("ValidationError: threads: {e}")))?;
    }
    let mut records = Vec::new();
    let result = runner(&cfg, &mut records);
    output::write_records(&cfg, &records).map_err(|e| (3, format!("IoError: {e}")))?;
    match result {
        Ok(true) => Ok(0),
        Ok(false) => Ok(1),
        Err(e) => Err((if e.is_validation() { 2 } else { 3 }, e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("biortho: {msg}");
            ExitCode::from(code)
        }
    }
}
