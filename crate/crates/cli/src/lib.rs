//! Command-line front end: `entropic {solve,interpolate,sweep,verify} --config FILE`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a verification check
//! failed, 3 the Schrödinger system did not converge.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_interpolate, cmd_solve, cmd_sweep, cmd_verify, run_checks, RunArgs};
pub use error::{CliError, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED};

#[derive(Debug, Parser)]
#[command(name = "entropic", version, about = "Entropic interpolation and heat-flow checks on a grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Schrödinger system; writes solution.txt and diagnostics.csv.
    Solve(CommonArgs),
    /// Sample the entropic interpolation; writes interp.csv.
    Interpolate(CommonArgs),
    /// Sweep eps or heat-flow time; writes sweep.csv.
    Sweep(CommonArgs),
    /// Run inequality checks; writes report.txt.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `output`, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated subset of checks.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
}

impl CommonArgs {
    fn into_run(self, checks: Option<Vec<String>>) -> RunArgs {
        RunArgs {
            config: self.config,
            out: self.out,
            quiet: self.quiet,
            checks,
        }
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a.into_run(None)),
        Command::Interpolate(a) => cmd_interpolate(&a.into_run(None)),
        Command::Sweep(a) => cmd_sweep(&a.into_run(None)),
        Command::Verify(a) => cmd_verify(&a.common.into_run(a.checks)),
    };
    match outcome {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("entropic: {e}");
            e.exit_code()
        }
    }
}
