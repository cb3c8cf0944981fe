//! Command-line front end: simulation drivers, the homogeneity audit, the
//! significance report and plotting.
//!
//! Exit codes:
//!
//! | code | meaning                                           |
//! |------|---------------------------------------------------|
//! | 0    | success; for verdict commands, `HOMOGENEOUS`      |
//! | 1    | `INHOMOGENEOUS`                                   |
//! | 2    | usage, input, configuration or I/O error          |
//! | 3    | `INCONCLUSIVE`                                    |
//!
//! `audit` always reports a verdict; `significance` does so with `--audit`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod io;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

use shl_core::homogeneity::Verdict;

pub use commands::{
    AuditArgs, OptimizeArgs, ReportArgs, SignificanceArgs, SimulateDeviceArgs, SimulateEberhardArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "shl",
    version,
    about = "Simulate repeated experiments and audit their sample homogeneity"
)]
pub struct Cli {
    /// Worker threads for simulation and permutation tests; outputs do not depend on it.
    #[arg(long, global = true, env = "SHL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the pooled-context device and write an outcomes CSV.
    SimulateDevice(SimulateDeviceArgs),
    /// Run the homogeneity battery on an outcomes or values CSV.
    Audit(AuditArgs),
    /// Simulate per-bin Eberhard counts and write a counts CSV.
    SimulateEberhard(SimulateEberhardArgs),
    /// Estimate J and its significance from a counts CSV.
    Significance(SignificanceArgs),
    /// Search for settings minimizing the expected J per pair.
    Optimize(OptimizeArgs),
    /// Plot per-bin J values from a report.
    Report(ReportArgs),
}

/// Result of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Verdict(Verdict),
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done | Outcome::Verdict(Verdict::Homogeneous) => 0,
            Outcome::Verdict(Verdict::Inhomogeneous) => 1,
            Outcome::Verdict(Verdict::Inconclusive) => 3,
        }
    }
}

pub const ERROR_EXIT: i32 = 2;

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { ERROR_EXIT } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(anyhow::Error::from)
            .and_then(|pool| pool.install(|| commands::execute(&cli.command, out))),
        None => commands::execute(&cli.command, out),
    };
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            ERROR_EXIT
        }
    }
}
