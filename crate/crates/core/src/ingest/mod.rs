//! File formats and per-auction series assembly.

mod schema;
mod series;
#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::TimeMs;

pub use schema::{
    parse_auctions, parse_feed, parse_quotes, parse_tape, parse_volumes, write_auctions,
    write_feed, write_quotes, write_tape, write_volumes, AuctionRecord, TapeAction, TapeEvent,
    AUCTIONS_HEADER, FEED_HEADER, QUOTES_HEADER, TAPE_HEADER, VOLUMES_HEADER,
};
pub use series::{
    align_quotes, slice_minutes, slice_updates, AuctionSide, DailyVolume, DailyVolumeRecord,
    DayAuctionSeries, Exchange, QuoteSnapshot, SeriesKey, SliceDirection, MINUTE_MS,
};

pub const TAPE_FILE: &str = "tape.csv";
pub const FEED_FILE: &str = "feed.csv";
pub const QUOTES_FILE: &str = "quotes.csv";
pub const VOLUMES_FILE: &str = "volumes.csv";
pub const AUCTIONS_FILE: &str = "auctions.csv";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: time {time_ms} does not follow the previous row of {key}")]
    NonMonotoneTime {
        line: u64,
        key: series::SeriesKey,
        time_ms: TimeMs,
    },
    #[error("{key}: update at {time_ms} is not before the auction time {auction_time_ms}")]
    UpdateAfterAuction {
        key: series::SeriesKey,
        time_ms: TimeMs,
        auction_time_ms: TimeMs,
    },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    fn in_file(self, path: &Path) -> IngestError {
        IngestError::File {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

/// Copies auction time, reference and outcome onto the matching series.
/// Auctions without feed rows become empty series appended at the end.
pub fn attach_auctions(
    series: &mut Vec<DayAuctionSeries>,
    records: &[AuctionRecord],
) -> Result<(), IngestError> {
    let index: HashMap<SeriesKey, usize> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (s.key.clone(), i))
        .collect();
    for r in records {
        let i = match index.get(&r.key) {
            Some(&i) => i,
            None => {
                series.push(DayAuctionSeries::new(r.key.clone()));
                series.len() - 1
            }
        };
        let s = &mut series[i];
        if let Some(last) = s.updates.last() {
            if last.time_ms >= r.auction_time_ms {
                return Err(IngestError::UpdateAfterAuction {
                    key: r.key.clone(),
                    time_ms: last.time_ms,
                    auction_time_ms: r.auction_time_ms,
                });
            }
        }
        s.auction_time_ms = Some(r.auction_time_ms);
        s.reference_price = Some(r.reference_price);
        s.final_price = r.final_price;
        s.final_volume = r.final_volume;
    }
    Ok(())
}

/// Aligns each quote group with the series of the same key.
pub fn attach_quotes(
    series: Vec<DayAuctionSeries>,
    quotes: &[(SeriesKey, Vec<QuoteSnapshot>)],
) -> Vec<DayAuctionSeries> {
    let by_key: HashMap<&SeriesKey, &[QuoteSnapshot]> =
        quotes.iter().map(|(k, q)| (k, q.as_slice())).collect();
    series
        .into_iter()
        .map(|s| match by_key.get(&s.key) {
            Some(q) => align_quotes(s, q),
            None => s,
        })
        .collect()
}

/// Everything the estimators consume.
#[derive(Debug, Default, Clone)]
pub struct Dataset {
    pub series: Vec<DayAuctionSeries>,
    pub volumes: Vec<DailyVolume>,
}

fn open(path: &Path) -> Result<Option<BufReader<File>>, IngestError> {
    match File::open(path) {
        Ok(f) => Ok(Some(BufReader::new(f))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(IngestError::Io(e).in_file(path)),
    }
}

/// Loads whichever of the feed, auctions, quotes and volumes files exist in
/// `dir`.
pub fn load_dataset(dir: &Path) -> Result<Dataset, IngestError> {
    let mut data = Dataset::default();
    let path = dir.join(FEED_FILE);
    if let Some(r) = open(&path)? {
        data.series = parse_feed(r).map_err(|e| e.in_file(&path))?;
    }
    let path = dir.join(AUCTIONS_FILE);
    if let Some(r) = open(&path)? {
        let records = parse_auctions(r).map_err(|e| e.in_file(&path))?;
        attach_auctions(&mut data.series, &records).map_err(|e| e.in_file(&path))?;
    }
    let path = dir.join(QUOTES_FILE);
    if let Some(r) = open(&path)? {
        let quotes = parse_quotes(r).map_err(|e| e.in_file(&path))?;
        data.series = attach_quotes(std::mem::take(&mut data.series), &quotes);
    }
    let path = dir.join(VOLUMES_FILE);
    if let Some(r) = open(&path)? {
        data.volumes = parse_volumes(r).map_err(|e| e.in_file(&path))?;
    }
    Ok(data)
}
