use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use auctionlab::flow::{
    asset_name, gen_day_series, gen_volume_panel, listing, sub_seed, trading_days, DaySimulation, FlowError,
    FlowParams, PanelParams,
};
use auctionlab::ingest::{
    write_auctions, write_feed, write_quotes, write_tape, write_volumes, AuctionRecord, AuctionSide, IngestError,
    SeriesKey, AUCTIONS_FILE, FEED_FILE, QUOTES_FILE, TAPE_FILE, VOLUMES_FILE,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{venue_name, RunConfig};
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

const FLOW_STREAM: u64 = 11;
const LEVEL_STREAM: u64 = 12;
const VOLUME_STREAM: u64 = 13;

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub output: PathBuf,
    pub seed: u64,
    pub preset: String,
    pub assets: Option<usize>,
    pub days: Option<usize>,
    pub venue_preset: Option<String>,
    pub throttle_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationManifest {
    pub command: &'static str,
    pub seed: u64,
    pub preset: String,
    pub assets: usize,
    pub days: usize,
    pub start: chrono::NaiveDate,
    pub throttle_hz: Option<f64>,
    pub venue_preset: Option<String>,
    /// Restricted phase length applied per venue and auction side.
    pub cutoffs_s: BTreeMap<String, Option<f64>>,
    /// Template of every day's flow; prices and seeds vary per auction.
    pub flow: FlowParams,
    pub panel: PanelParams,
    pub series: usize,
    pub uncrossed: usize,
    pub rejected_events: usize,
    /// Data rows per file.
    pub rows: BTreeMap<&'static str, usize>,
}

/// Appends CSV chunks to one file, keeping only the first chunk's header.
struct Appender {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
    started: bool,
}

impl Appender {
    fn create(path: PathBuf) -> Result<Self, CliError> {
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Appender {
            path,
            out: BufWriter::new(file),
            rows: 0,
            started: false,
        })
    }

    fn append(&mut self, write: impl FnOnce(&mut Vec<u8>) -> Result<(), IngestError>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(CliError::internal)?;
        let body_start = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
        self.rows += buf[body_start..].iter().filter(|&&b| b == b'\n').count();
        let chunk = if self.started { &buf[body_start..] } else { &buf[..] };
        self.started = true;
        self.out.write_all(chunk).map_err(|e| CliError::io(&self.path, e))
    }

    fn finish(mut self) -> Result<usize, CliError> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.rows)
    }
}

/// Multiplier of the preset's price level for asset `i`, log-uniform on
/// `[10^-0.5, 10^0.5]`.
fn price_scale(seed: u64, asset: usize) -> f64 {
    let u = (sub_seed(seed, &[LEVEL_STREAM, asset as u64]) >> 11) as f64 / (1u64 << 53) as f64;
    10f64.powf(u - 0.5)
}

fn side_index(side: AuctionSide) -> u64 {
    match side {
        AuctionSide::Open => 0,
        AuctionSide::Close => 1,
    }
}

fn flow_error(e: FlowError) -> CliError {
    match e {
        FlowError::InvalidParams(m) => CliError::input(m),
        FlowError::Book(b) => CliError::internal(format!("generator: {b}")),
    }
}

/// Generates a dataset into `opts.output`. Every auction draws from its own
/// `(asset, day, side)` sub-seed, so the output does not depend on `--jobs`.
pub fn simulate(config: &RunConfig, opts: &SimulateOptions) -> Result<SimulationManifest, CliError> {
    let preset = config.preset(&opts.preset)?;
    let assets = opts.assets.unwrap_or(preset.assets);
    let n_days = opts.days.unwrap_or(preset.days);
    if assets == 0 || n_days == 0 {
        return Err(CliError::input("need at least one asset and one day"));
    }
    let forced = opts.venue_preset.as_deref().map(|v| config.venue(v)).transpose()?;
    let cutoff = |asset: usize, side: AuctionSide| -> Option<f64> {
        forced
            .or_else(|| config.venue_for(listing(asset), side))
            .or(preset.flow.cutoff_s)
    };
    let mut cutoffs_s = BTreeMap::new();
    for i in 0..assets.min(3) {
        for side in AuctionSide::BOTH {
            let c = cutoff(i, side);
            if let Some(c) = c {
                if c > preset.flow.duration_s {
                    return Err(CliError::input(format!(
                        "cut-off of {c} s for {} exceeds the {} s session",
                        venue_name(listing(i), side),
                        preset.flow.duration_s
                    )));
                }
            }
            cutoffs_s.insert(venue_name(listing(i), side), c);
        }
    }
    preset.flow.validate().map_err(flow_error)?;

    let dir = &opts.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let dates = trading_days(preset.start, n_days);
    let mut tape = Appender::create(dir.join(TAPE_FILE))?;
    let mut feed = Appender::create(dir.join(FEED_FILE))?;
    let mut quotes = Appender::create(dir.join(QUOTES_FILE))?;
    let mut auctions = Appender::create(dir.join(AUCTIONS_FILE))?;
    let mut series = 0;
    let mut uncrossed = 0;
    let mut rejected_events = 0;

    let units: Vec<(usize, AuctionSide)> = (0..assets)
        .flat_map(|i| AuctionSide::BOTH.map(|s| (i, s)))
        .collect();
    for (d, date) in dates.iter().enumerate() {
        let day: Vec<(DaySimulation, AuctionRecord)> = units
            .par_iter()
            .map(|&(i, side)| {
                let mut params = preset.flow.clone();
                let scale = price_scale(opts.seed, i);
                params.fundamental = ((preset.flow.fundamental as f64 * scale).round() as i64).max(1);
                params.reference_price = ((preset.flow.reference_price as f64 * scale).round() as i64).max(1);
                params.cutoff_s = cutoff(i, side);
                params.seed = sub_seed(opts.seed, &[FLOW_STREAM, i as u64, d as u64, side_index(side)]);
                let key = SeriesKey::new(asset_name(i), *date, side);
                let sim = gen_day_series(&params, key, opts.throttle_hz).map_err(flow_error)?;
                let record = AuctionRecord {
                    restricted_from_ms: params.restricted_from_ms(),
                    ..AuctionRecord::of_series(&sim.series).expect("generated series carry their auction")
                };
                Ok((sim, record))
            })
            .collect::<Result<_, CliError>>()?;

        series += day.len();
        uncrossed += day.iter().filter(|(s, _)| s.series.final_price.is_none()).count();
        rejected_events += day.iter().map(|(s, _)| s.replay.rejected.len()).sum::<usize>();
        tape.append(|w| write_tape(w, day.iter().map(|(s, _)| (&s.series.key, s.tape.as_slice()))))?;
        feed.append(|w| write_feed(w, day.iter().map(|(s, _)| &s.series)))?;
        quotes.append(|w| write_quotes(w, day.iter().map(|(s, _)| (&s.series.key, s.quotes.as_slice()))))?;
        auctions.append(|w| write_auctions(w, day.iter().map(|(_, r)| r)))?;
    }

    let panel = PanelParams {
        assets: preset.volume_assets.unwrap_or(assets),
        days: n_days,
        start: preset.start,
        seed: sub_seed(opts.seed, &[VOLUME_STREAM]),
        ..preset.panel.clone()
    };
    let volumes = gen_volume_panel(&panel).map_err(flow_error)?;
    let mut vol = Appender::create(dir.join(VOLUMES_FILE))?;
    vol.append(|w| write_volumes(w, &volumes))?;

    let mut rows = BTreeMap::new();
    rows.insert(TAPE_FILE, tape.finish()?);
    rows.insert(FEED_FILE, feed.finish()?);
    rows.insert(QUOTES_FILE, quotes.finish()?);
    rows.insert(AUCTIONS_FILE, auctions.finish()?);
    rows.insert(VOLUMES_FILE, vol.finish()?);

    let manifest = SimulationManifest {
        command: "simulate",
        seed: opts.seed,
        preset: opts.preset.clone(),
        assets,
        days: n_days,
        start: preset.start,
        throttle_hz: opts.throttle_hz,
        venue_preset: opts.venue_preset.clone(),
        cutoffs_s,
        flow: preset.flow.clone(),
        panel,
        series,
        uncrossed,
        rejected_events,
        rows,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
