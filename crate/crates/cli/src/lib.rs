//! Batch front end over the `catloop` core library.
//!
//! Every command reads its inputs, writes plot-ready JSON artifacts plus a
//! `manifest.json` into the output directory, and prints a short summary.
//! Exit codes: 0 when the run completed, 1 for usage or config errors, 2 when
//! no input could be processed.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;

use catloop::config::{Config, ConfigError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use manifest::{digest_hex, InputDigest, OutputDigest, RunManifest};
pub use output::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "catloop", version, about = "Score, describe and search crystal structures")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; missing sections take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed; overrides `search.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for file-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory receiving all output artifacts.
    #[arg(long, global = true, default_value = "catloop-out")]
    pub out: PathBuf,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score CIF files and tabulate PF/VF/CM/PV failure rates.
    Validate {
        /// CIF files or directories of `*.cif` files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Target composition formula (overrides `validate.target`).
        #[arg(long)]
        target: Option<String>,
    },
    /// Render tagged structures as three-part system text. Each `X.cif`
    /// needs a metadata sidecar `X.json`.
    Textify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Group-relative advantages and KL-penalized losses from a groups file.
    Grpo {
        /// Line-delimited JSON, one group per line.
        groups: PathBuf,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Max-min tanh-gated multi-task loss.
    Mmtg {
        /// Line-delimited JSON records `{"l_mae": .., "l_ce": ..}`.
        input: Option<PathBuf>,
        #[arg(long, requires = "l_ce", conflicts_with = "input")]
        l_mae: Option<f64>,
        #[arg(long, requires = "l_mae")]
        l_ce: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Closed-loop exemplar-pool search against a target energy.
    Search {
        /// Template CIF (overrides `search_files.template`).
        #[arg(long)]
        template: Option<PathBuf>,
        /// CIF whose surrogate energy becomes the target.
        #[arg(long)]
        target_structure: Option<PathBuf>,
        /// Target energy in eV (overrides `search.target_energy`).
        #[arg(long, conflicts_with = "target_structure")]
        target_energy: Option<f64>,
    },
    /// Minimum distances, volume per atom and neighbor lists.
    Geometry {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no processable inputs: {0}")]
    NoInput(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NoInput(_) => 2,
            _ => 1,
        }
    }
}

/// Shared state of one command invocation.
pub struct RunContext {
    pub config: Config,
    pub config_dir: Option<PathBuf>,
    pub seed: u64,
    pub format: Format,
    pub pool: rayon::ThreadPool,
}

impl RunContext {
    fn new(global: &GlobalArgs) -> Result<Self, CliError> {
        let config = match &global.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let config_dir = global
            .config
            .as_ref()
            .map(|p| p.parent().map(PathBuf::from).unwrap_or_default());
        let jobs = match global.jobs {
            Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
        let seed = global.seed.unwrap_or(config.search.seed);
        Ok(RunContext {
            config,
            config_dir,
            seed,
            format: global.format,
            pool,
        })
    }

    /// Resolves a path from the config file relative to the config's directory.
    fn config_path(&self, p: &str) -> PathBuf {
        match &self.config_dir {
            Some(dir) => dir.join(p),
            None => PathBuf::from(p),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = RunContext::new(&cli.global)?;
    let out = OutputDir::create(&cli.global.out)?;
    match &cli.command {
        Command::Validate { paths, target } => commands::validate::run(&ctx, out, paths, target.as_deref()),
        Command::Textify { paths } => commands::textify::run(&ctx, out, paths),
        Command::Grpo { groups, beta, epsilon } => commands::grpo::run(&ctx, out, groups, *beta, *epsilon),
        Command::Mmtg {
            input,
            l_mae,
            l_ce,
            lambda,
        } => commands::mmtg::run(&ctx, out, input.as_deref(), l_mae.zip(*l_ce), *lambda),
        Command::Search {
            template,
            target_structure,
            target_energy,
        } => commands::search::run(&ctx, out, template.as_deref(), target_structure.as_deref(), *target_energy),
        Command::Geometry { paths } => commands::geometry::run(&ctx, out, paths),
    }
}
