//! Library side of the `auctionlab` binary: argument types, configuration
//! and the three commands, callable without a process boundary.

pub mod analyze;
pub mod config;
pub mod error;
pub mod replay;
pub mod simulate;
pub mod table;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use analyze::{analyze, AnalyzeOptions, AnalysisManifest, Table};
pub use config::{RunConfig, Thresholds};
pub use error::CliError;
pub use replay::{replay, ReplayOptions, ReplaySummary};
pub use simulate::{simulate, SimulateOptions, SimulationManifest};

#[derive(Debug, Parser)]
#[command(name = "auctionlab", version, about = "Call-auction simulation and pre-auction analytics")]
pub struct Cli {
    /// Config file replacing the bundled defaults.
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset: order tape, feed, quotes, auctions and daily volumes.
    Simulate(SimulateArgs),
    /// Compute the result tables from a dataset directory.
    Analyze(AnalyzeArgs),
    /// Drive an order tape through the book and write the disseminated feed.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory to write the dataset into; created if missing.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Panel preset from the config.
    #[arg(long, default_value = "small")]
    pub preset: String,
    /// Overrides the preset's asset count.
    #[arg(long)]
    pub assets: Option<usize>,
    /// Overrides the preset's day count.
    #[arg(long)]
    pub days: Option<usize>,
    /// Applies this venue's cut-off to every auction instead of the listing venue's.
    #[arg(long)]
    pub venue_preset: Option<String>,
    /// Keep the last update of every 1/hz window in the feed.
    #[arg(long)]
    pub throttle_hz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Dataset directory.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for the tables and `analysis.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated table names, or `all`.
    #[arg(long, default_value = "all", value_parser = analyze::parse_selection)]
    pub estimator: analyze::Selection,
    /// Time-slice width; overrides the config.
    #[arg(long)]
    pub slice_seconds: Option<u64>,
    /// Priced updates a day needs for the diffusion table.
    #[arg(long)]
    pub min_updates: Option<usize>,
    /// Executed orders an auction needs before its tail fit.
    #[arg(long)]
    pub min_orders: Option<usize>,
    /// Assets a month needs in the monthly volume series.
    #[arg(long)]
    pub min_assets: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A tape file, or a dataset directory holding `tape.csv`.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `feed.csv`, `auctions.csv` and `replay.json`.
    #[arg(long)]
    pub output: PathBuf,
    /// Keep the last update of every 1/hz window in the feed.
    #[arg(long)]
    pub throttle_hz: Option<f64>,
    /// Cut-off for the restricted phase, overriding `auctions.csv`.
    #[arg(long)]
    pub venue_preset: Option<String>,
}

/// Writes one `key=value` diagnostic line to stderr.
pub fn diag(level: &str, event: &str, fields: &[(&str, &str)]) {
    let mut line = format!("level={level} event={event}");
    for (k, v) in fields {
        if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
            line.push_str(&format!(" {k}={v:?}"));
        } else {
            line.push_str(&format!(" {k}={v}"));
        }
    }
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn check_hz(hz: Option<f64>) -> Result<Option<f64>, CliError> {
    match hz {
        Some(h) if !(h > 0.0 && h.is_finite()) => Err(CliError::input("--throttle-hz must be positive")),
        h => Ok(h),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    if cli.jobs == Some(0) {
        return Err(CliError::input("--jobs must be positive"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(CliError::internal)?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => {
            let opts = SimulateOptions {
                output: a.output,
                seed: a.seed,
                preset: a.preset,
                assets: a.assets,
                days: a.days,
                venue_preset: a.venue_preset,
                throttle_hz: check_hz(a.throttle_hz)?,
            };
            let m = simulate(&config, &opts)?;
            diag(
                "info",
                "simulated",
                &[("series", &m.series.to_string()), ("output", &opts.output.display().to_string())],
            );
            Ok(())
        }
        Command::Analyze(a) => {
            let mut thresholds = config.thresholds;
            if let Some(v) = a.slice_seconds {
                thresholds.slice_seconds = v;
            }
            if let Some(v) = a.min_updates {
                thresholds.min_updates = v;
            }
            if let Some(v) = a.min_orders {
                thresholds.min_orders = v;
            }
            if let Some(v) = a.min_assets {
                thresholds.min_assets = v;
            }
            thresholds.validate()?;
            let opts = AnalyzeOptions {
                input: a.input,
                output: a.output,
                tables: a.estimator.0,
                thresholds,
            };
            let m = analyze(&opts)?;
            diag("info", "analyzed", &[("tables", &m.tables.len().to_string()), ("warnings", &m.warnings.to_string())]);
            Ok(())
        }
        Command::Replay(a) => {
            let cutoff_s = a.venue_preset.as_deref().map(|v| config.venue(v)).transpose()?;
            let opts = ReplayOptions {
                input: a.input,
                output: a.output,
                throttle_hz: check_hz(a.throttle_hz)?,
                cutoff_s,
            };
            let s = replay(&opts)?;
            diag(
                "info",
                "replayed",
                &[("series", &s.series.to_string()), ("events", &s.events.to_string()), ("rejected", &s.rejected.to_string())],
            );
            Ok(())
        }
    })
}
