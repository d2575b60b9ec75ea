//! Command-line surface: global flags and one subcommand per pipeline stage.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Stability regions and queueing delay for queue-aware slotted ALOHA with
/// multi-packet reception.
#[derive(Debug, Parser)]
#[command(name = "qaloha", version, propagate_version = true)]
pub struct Cli {
    /// JSON configuration file (schema depends on the subcommand).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write the result to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Seed override for simulation-backed commands; always recorded in the
    /// output provenance line.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Size of the worker thread pool (defaults to the number of cores).
    /// Thread count never changes output bytes, only wall-clock time.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership grid of the exact two-user stability region (CSV).
    Region,

    /// Membership grid of the three-user stability region, classified
    /// through each choice of saturated user (CSV).
    Region3,

    /// Boundary envelope of the stability region closed over the transmit
    /// policy, with and without empty-queue adaptation (CSV).
    Closure,

    /// Kernel branch points and the analytic contours in both transform
    /// planes (CSV).
    Kernel,

    /// Boundary-correspondence table and per-node residuals of the numerical
    /// conformal map (CSV).
    ConformalDiag,

    /// Mean queue lengths and delays from the boundary-value solver: a JSON
    /// report for one rate pair, or a CSV sweep over the configured grid.
    DelayBvp {
        /// Arrival rate of user 1 (single-point report; needs --lambda2).
        #[arg(long, value_name = "RATE")]
        lambda1: Option<f64>,

        /// Arrival rate of user 2 (single-point report; needs --lambda1).
        #[arg(long, value_name = "RATE")]
        lambda2: Option<f64>,

        /// Sweep the rate grid from the config file and emit CSV.
        #[arg(long, conflicts_with_all = ["lambda1", "lambda2"])]
        sweep: bool,
    },

    /// Closed-form symmetric-user delay: the exact value in the capture
    /// subclass, lower/upper bounds otherwise (CSV sweep).
    DelaySymmetric {
        /// Sweep the common arrival rate over START:STOP:STEP.
        #[arg(long, value_name = "START:STOP:STEP")]
        sweep_lambda: Option<String>,

        /// Sweep the empty-watched transmit probability over START:STOP:STEP
        /// at the arrival rate fixed in the config.
        #[arg(long, value_name = "START:STOP:STEP", conflicts_with = "sweep_lambda")]
        sweep_alpha_star: Option<String>,
    },

    /// Delay-optimal busy transmit probability for symmetric users (JSON).
    OptimizeAlpha,

    /// Discrete-time Monte-Carlo simulation of the protocol (JSON stats).
    Simulate {
        /// Override the total slot count from the config.
        #[arg(long, value_name = "N")]
        slots: Option<u64>,

        /// Override the protocol mode: `normal`, `dominant:K`, or
        /// `interfering:K` with K a 0-based user index.
        #[arg(long, value_name = "MODE")]
        mode: Option<String>,

        /// Also write the per-user delay histograms to this CSV file.
        #[arg(long, value_name = "PATH")]
        histogram: Option<PathBuf>,
    },

    /// Cross-check the analytic results against closed forms and simulation;
    /// exits 0 iff no check fails (budget-limited checks may be
    /// inconclusive, which does not fail the run).
    Validate {
        /// Slot budget for the simulation-backed checks.
        #[arg(long, value_name = "N")]
        slots: Option<u64>,
    },
}

impl Command {
    /// Stable name used in provenance hashing and error messages.
    pub fn name(&self) -> &'static str {
        match self {
            Command::Region => "region",
            Command::Region3 => "region3",
            Command::Closure => "closure",
            Command::Kernel => "kernel",
            Command::ConformalDiag => "conformal-diag",
            Command::DelayBvp { .. } => "delay-bvp",
            Command::DelaySymmetric { .. } => "delay-symmetric",
            Command::OptimizeAlpha => "optimize-alpha",
            Command::Simulate { .. } => "simulate",
            Command::Validate { .. } => "validate",
        }
    }
}
