//! Library backing the `qaloha` binary: argument types, config schemas, and
//! one function per subcommand, so integration tests can drive the commands
//! without spawning processes.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use std::path::Path;

use thiserror::Error;

/// Errors surfaced to the user. Anything carrying a config path means the
/// config (or an object built from it) was rejected.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Model(#[from] qaloha::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Ctx<'a> {
    pub config: Option<&'a Path>,
    pub output: Option<&'a Path>,
    pub seed: Option<u64>,
}

impl Ctx<'_> {
    /// Seed in force: the `--seed` flag, else the given default.
    pub fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: &cli::Cli) -> Result<i32, CliError> {
    use cli::Command;

    if let Some(n) = cli.threads {
        // The global pool can only be installed once per process; later calls
        // keep the existing pool. Thread count never changes output bytes,
        // only wall-clock time, so this is safe to ignore.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    let ctx = Ctx {
        config: cli.config.as_deref(),
        output: cli.output.as_deref(),
        seed: cli.seed,
    };

    match &cli.command {
        Command::Region => commands::region(&ctx).map(|()| 0),
        Command::Region3 => commands::region3(&ctx).map(|()| 0),
        Command::Closure => commands::closure(&ctx).map(|()| 0),
        Command::Kernel => commands::kernel(&ctx).map(|()| 0),
        Command::ConformalDiag => commands::conformal_diag(&ctx).map(|()| 0),
        Command::DelayBvp {
            lambda1,
            lambda2,
            sweep,
        } => commands::delay_bvp(&ctx, *lambda1, *lambda2, *sweep).map(|()| 0),
        Command::DelaySymmetric {
            sweep_lambda,
            sweep_alpha_star,
        } => commands::delay_symmetric(&ctx, sweep_lambda.as_deref(), sweep_alpha_star.as_deref())
            .map(|()| 0),
        Command::OptimizeAlpha => commands::optimize_alpha(&ctx).map(|()| 0),
        Command::Simulate {
            slots,
            mode,
            histogram,
        } => commands::simulate(&ctx, *slots, mode.as_deref(), histogram.as_deref()).map(|()| 0),
        Command::Validate { slots } => validate::run(&ctx, *slots),
    }
}
