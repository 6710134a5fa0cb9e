//! Command-line front end for the annulus ground-state solver.
//!
//! Four subcommands cover the workflow:
//!
//! * `solve`             — construct one positive axisymmetric solution by
//!                         separatrix bisection, descent flow, and Newton
//!                         polish; persist the field, energy split, cone
//!                         report, and flow trace;
//! * `certify-nonradial` — compare the ground-state candidate against the
//!                         radial profile and evaluate the spectral
//!                         instability criterion α₁ + 2N < 0;
//! * `verify`            — run the structural invariant suites and print a
//!                         pass/fail matrix;
//! * `sweep`             — tabulate α₁ against p or R over a parameter
//!                         range, with threshold detection and a log-log
//!                         slope fit.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 solver
//! failure, 4 verification failure.  One JSON config plus a seed fixes a
//! run; identical runs produce bit-identical artifacts.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod certify;
pub mod config;
pub mod output;
pub mod solve;
pub mod sweep;
pub mod verify;

/// Exit code for configuration and validation problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for solver-stage failures.
pub const EXIT_SOLVER: i32 = 3;
/// Exit code for failed verification suites.
pub const EXIT_VERIFY: i32 = 4;

/// A command failure carrying the exit code and a short stage label.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub stage: String,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, stage: "validation".into(), message: message.into() }
    }

    pub fn solver(stage: &str, message: impl Into<String>) -> Self {
        Failure { code: EXIT_SOLVER, stage: stage.into(), message: message.into() }
    }
}

/// Construct positive axisymmetric ground states of -Δu + u = a(x)|u|^{p-2}u
/// on an annulus, and certify when they cannot be radial.
#[derive(Debug, Parser)]
#[command(name = "annulus", version, disable_help_subcommand = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each one overrides its config field.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the JSON run configuration (defaults apply when omitted).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed override for randomized sampling.
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Worker-pool size override (sweeps only; others are single-threaded).
    #[arg(long, value_name = "INT")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for one ground-state candidate and persist the solution record.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the nonradiality criterion and report candidate vs radial.
    CertifyNonradial {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the structural invariant suites and print a pass/fail matrix.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only the named suites (repeatable); unknown names select
        /// nothing.
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        /// Inject a named assembly fault to exercise the suites' teeth.
        #[arg(long = "fault-inject", value_name = "NAME")]
        fault: Option<String>,
    },
    /// Tabulate the instability criterion over a parameter range.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Reuse per-sample files already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
}

/// Load the config, apply CLI overrides, validate, and prepare the output
/// directory.
fn prepare(common: &CommonArgs) -> Result<config::RunConfig, Failure> {
    let mut cfg = config::RunConfig::load(common.config.as_deref())
        .map_err(Failure::validation)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    cfg.validate().map_err(Failure::validation)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Failure::validation(format!("output directory {}: {e}", cfg.out_dir)))?;
    Ok(cfg)
}

/// Run one parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Solve { common } => prepare(&common).and_then(|cfg| solve::cmd_solve(&cfg)),
        Command::CertifyNonradial { common } => {
            prepare(&common).and_then(|cfg| certify::cmd_certify(&cfg))
        }
        Command::Verify { common, suites, fault } => {
            prepare(&common).and_then(|cfg| verify::cmd_verify(&cfg, &suites, fault.as_deref()))
        }
        Command::Sweep { common, resume } => prepare(&common).and_then(|mut cfg| {
            cfg.sweep.resume |= resume;
            sweep::cmd_sweep(&cfg)
        }),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, f.message);
            f.code
        }
    }
}
