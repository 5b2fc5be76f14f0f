use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use auctionlab::book::{BookError, OrderKind};
use auctionlab::flow::{self, throttle, Replay};
use auctionlab::ingest::{
    parse_auctions, parse_tape, write_auctions, write_feed, AuctionRecord, DayAuctionSeries, IngestError, SeriesKey,
    TapeAction, TapeEvent, AUCTIONS_FILE, FEED_FILE, TAPE_FILE,
};
use auctionlab::{Tick, TimeMs};
use rayon::prelude::*;
use serde::Serialize;

use crate::diag;
use crate::error::CliError;
use crate::simulate::write_json;

pub const REPLAY_MANIFEST_FILE: &str = "replay.json";

#[derive(Debug, Clone)]
pub struct ReplayOptions {
    pub input: PathBuf,
    pub output: PathBuf,
    pub throttle_hz: Option<f64>,
    /// Restricted phase length in seconds; overrides `auctions.csv`.
    pub cutoff_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub command: &'static str,
    pub series: usize,
    pub events: usize,
    pub feed_rows: usize,
    pub rejected: usize,
    pub uncrossed: usize,
    pub throttle_hz: Option<f64>,
}

/// One auction driven through the book.
pub struct ReplayedAuction {
    pub record: AuctionRecord,
    pub replay: Replay,
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| in_file(path, IngestError::Io(e)))
}

pub(crate) fn in_file(path: &Path, e: IngestError) -> IngestError {
    IngestError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

/// Tape path and the `auctions.csv` beside it, if any.
fn locate(input: &Path) -> (PathBuf, Option<PathBuf>) {
    let (tape, dir) = if input.is_dir() {
        (input.join(TAPE_FILE), input.to_path_buf())
    } else {
        (input.to_path_buf(), input.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let auctions = dir.join(AUCTIONS_FILE);
    (tape, auctions.is_file().then_some(auctions))
}

pub(crate) fn load_auctions(path: &Path) -> Result<HashMap<SeriesKey, AuctionRecord>, IngestError> {
    let records = parse_auctions(open(path)?).map_err(|e| in_file(path, e))?;
    Ok(records.into_iter().map(|r| (r.key.clone(), r)).collect())
}

/// Auction parameters for a tape without an `auctions.csv` row: the first
/// limit price as reference, the auction one millisecond after the last
/// event.
fn fallback_record(key: &SeriesKey, tape: &[TapeEvent]) -> Result<AuctionRecord, CliError> {
    let reference: Option<Tick> = tape.iter().find_map(|e| match &e.action {
        TapeAction::Submit(o) => match o.kind {
            OrderKind::Limit(p) => Some(p),
            OrderKind::Market => None,
        },
        TapeAction::Cancel(_) => None,
    });
    let reference = reference
        .ok_or_else(|| CliError::input(format!("{key}: no auctions.csv row and no limit order to take a reference price from")))?;
    Ok(AuctionRecord {
        key: key.clone(),
        auction_time_ms: tape.last().map_or(0, |e| e.time_ms + 1),
        restricted_from_ms: None,
        reference_price: reference,
        final_price: None,
        final_volume: None,
    })
}

/// Replays one auction's tape and fills in its outcome.
pub fn replay_auction(
    key: &SeriesKey,
    tape: &[TapeEvent],
    record: Option<&AuctionRecord>,
    cutoff_s: Option<f64>,
) -> Result<ReplayedAuction, CliError> {
    let mut record = match record {
        Some(r) => r.clone(),
        None => fallback_record(key, tape)?,
    };
    if let Some(c) = cutoff_s {
        record.restricted_from_ms = Some(record.auction_time_ms - (c * 1000.0).round() as TimeMs);
    }
    if let Some(last) = tape.last() {
        if last.time_ms >= record.auction_time_ms {
            return Err(CliError::input(format!(
                "{key}: event at {} is not before the auction time {}",
                last.time_ms, record.auction_time_ms
            )));
        }
    }
    let replay = flow::replay(tape, record.reference_price, record.auction_time_ms, record.restricted_from_ms)
        .map_err(|e| match e {
            BookError::AuctionClosed | BookError::BackwardTransition { .. } => CliError::internal(format!("{key}: {e}")),
            e => CliError::input(format!("{key}: {e}")),
        })?;
    record.final_price = replay.result.final_price;
    record.final_volume = Some(replay.result.total_matched);
    Ok(ReplayedAuction { record, replay })
}

pub fn replay(opts: &ReplayOptions) -> Result<ReplaySummary, CliError> {
    let (tape_path, auctions_path) = locate(&opts.input);
    let tapes = parse_tape(open(&tape_path)?).map_err(|e| in_file(&tape_path, e))?;
    let records = match &auctions_path {
        Some(p) => load_auctions(p)?,
        None => HashMap::new(),
    };
    let replayed: Vec<ReplayedAuction> = tapes
        .par_iter()
        .map(|(key, tape)| replay_auction(key, tape, records.get(key), opts.cutoff_s))
        .collect::<Result<_, _>>()?;

    let mut summary = ReplaySummary {
        command: "replay",
        series: replayed.len(),
        events: tapes.iter().map(|(_, t)| t.len()).sum(),
        feed_rows: 0,
        rejected: 0,
        uncrossed: 0,
        throttle_hz: opts.throttle_hz,
    };
    let mut series = Vec::with_capacity(replayed.len());
    for (r, (key, tape)) in replayed.iter().zip(&tapes) {
        for (i, err) in &r.replay.rejected {
            let event = &tape[*i];
            diag(
                "warn",
                "rejected",
                &[
                    ("key", &key.to_string()),
                    ("time_ms", &event.time_ms.to_string()),
                    ("reason", &err.to_string()),
                ],
            );
        }
        summary.rejected += r.replay.rejected.len();
        summary.uncrossed += usize::from(r.record.final_price.is_none());
        let feed: Vec<_> = r.replay.updates.iter().map(|(_, u)| *u).collect();
        let updates = match opts.throttle_hz {
            Some(hz) => throttle(&feed, hz),
            None => feed,
        };
        summary.feed_rows += updates.len();
        series.push(DayAuctionSeries {
            auction_time_ms: Some(r.record.auction_time_ms),
            reference_price: Some(r.record.reference_price),
            final_price: r.record.final_price,
            final_volume: r.record.final_volume,
            updates,
            ..DayAuctionSeries::new(key.clone())
        });
    }

    let dir = &opts.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(FEED_FILE);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_feed(BufWriter::new(file), &series).map_err(CliError::internal)?;
    let path = dir.join(AUCTIONS_FILE);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_auctions(BufWriter::new(file), replayed.iter().map(|r| &r.record)).map_err(CliError::internal)?;
    write_json(&dir.join(REPLAY_MANIFEST_FILE), &summary)?;
    Ok(summary)
}
