//! Command-line front end: reads TOML experiment configs, runs them on a sized thread pool
//! and writes deterministic CSV/JSON results.
//!
//! Exit codes: 0 on success, 1 on I/O or runtime failure, 2 for a malformed config and 3
//! when every grid point of a search diverged.

pub mod commands;
pub mod config;
pub mod output;

use std::io;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

/// Environment variable naming the root directory for outputs when `--out` is absent.
pub const OUTPUT_ROOT_ENV: &str = "ALTUPDATE_OUTPUT_ROOT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    Config(String),
    #[error("all {0} grid points diverged")]
    AllDiverged(usize),
    #[error("{0}")]
    Output(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Core(#[from] altupdate::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::AllDiverged(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "altupdate", version, about = "Tune, evaluate and scan optimizers with alternative update rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid-search learning rates; writes leaderboard.csv and best.json.
    Tune(CommonArgs),
    /// One optimization run; writes trajectory.csv and trial.json.
    Trial(CommonArgs),
    /// Randomized-configuration evaluation; writes scores.csv and stats.json.
    Robustness(CommonArgs),
    /// 25×25 initial-point scan; writes surface.csv, surface_long.csv and scan.json.
    Scan(ScanArgs),
    /// Randomized-gain toy network training; writes per-run metrics and a summary.
    TrainToy(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory. Defaults to `<output root>/<command>/<config name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, env = OUTPUT_ROOT_ENV, default_value = "runs")]
    pub output_root: PathBuf,
    /// Master seed; overrides the config's `seed` where one applies.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Defaults to the available hardware parallelism.
    #[arg(long)]
    pub parallelism: Option<NonZeroUsize>,
    /// Replace existing output files.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Range of the first starting coordinate, `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    pub x1_range: Option<(f64, f64)>,
    /// Range of the second starting coordinate, `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    pub x2_range: Option<(f64, f64)>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((parse(lo)?, parse(hi)?))
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tune(_) => "tune",
            Command::Trial(_) => "trial",
            Command::Robustness(_) => "robustness",
            Command::Scan(_) => "scan",
            Command::TrainToy(_) => "train-toy",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Tune(c) | Command::Trial(c) | Command::Robustness(c) | Command::TrainToy(c) => c,
            Command::Scan(s) => &s.common,
        }
    }

    /// Directory the command writes into.
    pub fn output_dir(&self) -> PathBuf {
        let c = self.common();
        c.out.clone().unwrap_or_else(|| {
            let stem = c.config.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned());
            c.output_root.join(self.name()).join(stem)
        })
    }
}

/// Result of a successful run.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Run one command to completion, including writing its outputs.
pub fn run(command: &Command) -> Result<RunOutcome, CliError> {
    let common = command.common();
    let threads = common
        .parallelism
        .or_else(|| std::thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let report = pool.install(|| commands::dispatch(command))?;

    let out_dir = command.output_dir();
    report.bundle.write(&out_dir, common.overwrite)?;
    let files = report.bundle.names().map(Path::to_path_buf).collect();
    if let Some(n) = report.all_diverged {
        return Err(CliError::AllDiverged(n));
    }
    Ok(RunOutcome {
        out_dir,
        files,
        summary: report.summary,
    })
}
