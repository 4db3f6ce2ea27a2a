//! `twinx`: generate telemetry, train the forecaster, detect anomalies,
//! explain them and write a report.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "twinx", version, about = "Forecast, flag and explain anomalies in vehicle telemetry")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory, overriding the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic labelled telemetry CSV.
    Generate(GenerateArgs),
    /// Fit scaler, forecaster and error model on telemetry.
    Train(TrainArgs),
    /// Score every window of a telemetry file.
    Detect(DetectArgs),
    /// Explain flagged windows and render charts.
    Explain(ExplainArgs),
    /// Write a markdown index of all artifacts.
    Report,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output CSV (default: <out-dir>/telemetry.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Length in seconds (rows).
    #[arg(long)]
    pub duration: Option<usize>,
    /// Anomaly as channel:kind:start:length:magnitude; repeatable.
    #[arg(long = "inject")]
    pub injections: Vec<String>,
    /// Overwrite an existing output file.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Query CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file (default: <out-dir>/model.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(id = "selection", multiple = false)]
pub struct SelectionArgs {
    /// The k highest-scoring flagged windows.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Every flagged window.
    #[arg(long)]
    pub all_anomalies: bool,
    /// Windows by origin row index, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("TWINX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TWINX_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.out_dir {
        cfg.out_dir = Some(d);
    }
    match cli.command {
        Command::Generate(a) => commands::generate::run(cfg, a),
        Command::Train(a) => commands::train::run(cfg, a),
        Command::Detect(a) => commands::detect::run(cfg, a),
        Command::Explain(a) => commands::explain::run(cfg, a),
        Command::Report => commands::report::run(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
