//! Configuration-driven frontend: parses an experiment config, dispatches to
//! the solvers, and emits deterministic CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 2 config schema violation, 3 solver infeasibility
//! (diagnostics written to the output directory), 4 I/O failure. Log level
//! comes from the CONTRACTQ_LOG environment variable.

mod config;
mod output;
mod tasks;

use clap::{Parser, Subcommand};
use config::{ExperimentConfig, TaskKind};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Errors carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn solver(e: contractq::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "contractq",
    version,
    about = "Optimal incentive contracts with designed monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the seed in the config's solver block.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the number of parallel solver threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal N-cell cutoff contract for a scalar environment.
    SolveSingle { config: PathBuf },
    /// Optimal rating scale along a mu-grid.
    ScaleSweep { config: PathBuf },
    /// Group-vs-individual cost index along a mu-grid.
    GroupIndex { config: PathBuf },
    /// Assessment-weight ratio along a sigma1^2 grid.
    MultitaskSweep { config: PathBuf },
    /// Random-monitoring channel solve.
    RandomChannel { config: PathBuf },
    /// Brute-force verification of the optimizers on small grids.
    Verify { config: PathBuf },
}

impl Command {
    fn expected_task(&self) -> TaskKind {
        match self {
            Command::SolveSingle { .. } => TaskKind::SolveSingle,
            Command::ScaleSweep { .. } => TaskKind::ScaleSweep,
            Command::GroupIndex { .. } => TaskKind::GroupIndex,
            Command::MultitaskSweep { .. } => TaskKind::MultitaskSweep,
            Command::RandomChannel { .. } => TaskKind::RandomChannel,
            Command::Verify { .. } => TaskKind::Verify,
        }
    }

    fn config_path(&self) -> &Path {
        match self {
            Command::SolveSingle { config }
            | Command::ScaleSweep { config }
            | Command::GroupIndex { config }
            | Command::MultitaskSweep { config }
            | Command::RandomChannel { config }
            | Command::Verify { config } => config,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CONTRACTQ_LOG")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs.is_some() {
        log::warn!("--jobs ignored: built without the parallel feature");
    }

    let path = cli.command.config_path();
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {path:?}: {e}")))?;
    let mut cfg = ExperimentConfig::parse(&raw)?;
    if cfg.task != cli.command.expected_task() {
        return Err(CliError::Config(format!(
            "config task {} does not match subcommand {}",
            cfg.task.name(),
            cli.command.expected_task().name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    let digest = hex_digest(raw.as_bytes(), cli.seed);

    let result = tasks::run(&cfg, &digest);
    if let Err(CliError::Solver(msg)) = &result {
        // exit 3 ships diagnostics alongside whatever was written
        let doc = serde_json::json!({
            "config_digest": digest,
            "task": cfg.task.name(),
            "error": msg,
        });
        let _ = output::write_file(
            Path::new(&cfg.output.directory),
            "diagnostics.json",
            &serde_json::to_string_pretty(&doc).unwrap_or_default(),
        );
    }
    result
}

/// SHA-256 of the config bytes, plus any seed override (so overridden runs
/// get their own digest).
fn hex_digest(raw: &[u8], seed_override: Option<u64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw);
    if let Some(seed) = seed_override {
        hasher.update(seed.to_le_bytes());
    }
    let out = hasher.finalize();
    out.iter().fold(String::with_capacity(64), |mut acc, b| {
        use std::fmt::Write;
        let _ = write!(acc, "{b:02x}");
        acc
    })
}
