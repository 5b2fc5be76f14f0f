//! CSV schemas. Every file has a header row; dates are ISO-8601 and prices
//! are integer ticks. An empty price field means "no cross".

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::series::{
    AuctionSide, DailyVolume, DailyVolumeRecord, DayAuctionSeries, Exchange, QuoteSnapshot,
    SeriesKey,
};
use super::IngestError;
use crate::book::{AuctionOrder, IndicativeUpdate, OrderId, OrderKind, Side};
use crate::{Shares, Tick, TimeMs};

pub const FEED_HEADER: &[&str] = &[
    "asset",
    "date",
    "side",
    "time_ms",
    "indicative_price_ticks",
    "matched_volume",
    "imbalance",
];
pub const TAPE_HEADER: &[&str] = &[
    "asset",
    "date",
    "side",
    "time_ms",
    "action",
    "order_id",
    "buy_sell",
    "kind",
    "price_ticks",
    "size",
];
pub const QUOTES_HEADER: &[&str] = &[
    "asset",
    "date",
    "side",
    "time_ms",
    "bid_ticks",
    "ask_ticks",
    "bid_size",
    "ask_size",
];
pub const VOLUMES_HEADER: &[&str] = &[
    "asset",
    "date",
    "exchange",
    "v_open",
    "v_close",
    "v_total",
    "p_open",
    "p_close",
    "prev_close",
];
pub const AUCTIONS_HEADER: &[&str] = &[
    "asset",
    "date",
    "side",
    "auction_time_ms",
    "restricted_from_ms",
    "reference_price_ticks",
    "final_price_ticks",
    "final_volume",
];

#[derive(Debug, Serialize, Deserialize)]
struct FeedRow {
    asset: String,
    date: NaiveDate,
    side: AuctionSide,
    time_ms: TimeMs,
    indicative_price_ticks: Option<Tick>,
    matched_volume: Shares,
    imbalance: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ActionField {
    Submit,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindField {
    Limit,
    Market,
}

#[derive(Debug, Serialize, Deserialize)]
struct TapeRow {
    asset: String,
    date: NaiveDate,
    side: AuctionSide,
    time_ms: TimeMs,
    action: ActionField,
    order_id: u64,
    buy_sell: Option<Side>,
    kind: Option<KindField>,
    price_ticks: Option<Tick>,
    size: Option<Shares>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QuoteRow {
    asset: String,
    date: NaiveDate,
    side: AuctionSide,
    time_ms: TimeMs,
    bid_ticks: Tick,
    ask_ticks: Tick,
    bid_size: Shares,
    ask_size: Shares,
}

#[derive(Debug, Serialize, Deserialize)]
struct VolumeRow {
    asset: String,
    date: NaiveDate,
    exchange: Exchange,
    v_open: Shares,
    v_close: Shares,
    v_total: Shares,
    p_open: Tick,
    p_close: Tick,
    prev_close: Tick,
}

#[derive(Debug, Serialize, Deserialize)]
struct AuctionRow {
    asset: String,
    date: NaiveDate,
    side: AuctionSide,
    auction_time_ms: TimeMs,
    restricted_from_ms: Option<TimeMs>,
    reference_price_ticks: Tick,
    final_price_ticks: Option<Tick>,
    final_volume: Option<Shares>,
}

/// One order-tape action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TapeAction {
    Submit(AuctionOrder),
    Cancel(OrderId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapeEvent {
    pub time_ms: TimeMs,
    pub action: TapeAction,
}

/// Auction time, reference price and outcome of one auction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub key: SeriesKey,
    pub auction_time_ms: TimeMs,
    /// Start of the restricted (imbalance-reducing only) phase, if any.
    pub restricted_from_ms: Option<TimeMs>,
    pub reference_price: Tick,
    pub final_price: Option<Tick>,
    pub final_volume: Option<Shares>,
}

/// Rows grouped by key in order of first appearance.
struct Groups<T> {
    index: HashMap<SeriesKey, usize>,
    groups: Vec<(SeriesKey, Vec<T>)>,
}

impl<T> Groups<T> {
    fn new() -> Self {
        Groups {
            index: HashMap::new(),
            groups: Vec::new(),
        }
    }

    fn entry(&mut self, key: SeriesKey) -> &mut Vec<T> {
        let idx = *self.index.entry(key.clone()).or_insert_with(|| {
            self.groups.push((key, Vec::new()));
            self.groups.len() - 1
        });
        &mut self.groups[idx].1
    }
}

fn schema(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        line,
        message: message.into(),
    }
}

fn from_csv(err: csv::Error) -> IngestError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IngestError::Io(e),
        csv::ErrorKind::Deserialize { err, .. } => schema(line, err.to_string()),
        other => schema(line, format!("{other:?}")),
    }
}

/// Deserializes all rows after checking the header. An empty input yields
/// no rows.
/// Streams deserialized rows with their line numbers into `visit`.
fn each_row<R: Read, T: DeserializeOwned>(
    input: R,
    header: &[&str],
    mut visit: impl FnMut(u64, T) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = reader.headers().map_err(from_csv)?.clone();
    if found.is_empty() {
        return Ok(());
    }
    if found.iter().ne(header.iter().copied()) {
        return Err(schema(
            1,
            format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(0, |p| p.line());
                let row = record
                    .deserialize(Some(&found))
                    .map_err(|e| schema(line, e.to_string()))?;
                visit(line, row)?;
            }
            Err(e) => return Err(from_csv(e)),
        }
    }
    Ok(())
}

fn read_rows<R: Read, T: DeserializeOwned>(
    input: R,
    header: &[&str],
) -> Result<Vec<(u64, T)>, IngestError> {
    let mut rows = Vec::new();
    each_row(input, header, |line, row| {
        rows.push((line, row));
        Ok(())
    })?;
    Ok(rows)
}

fn check_time(
    last: &mut HashMap<SeriesKey, TimeMs>,
    key: &SeriesKey,
    time_ms: TimeMs,
    line: u64,
) -> Result<(), IngestError> {
    if time_ms < 0 {
        return Err(schema(line, "negative time_ms"));
    }
    if let Some(&prev) = last.get(key) {
        if time_ms <= prev {
            return Err(IngestError::NonMonotoneTime {
                line,
                key: key.clone(),
                time_ms,
            });
        }
    }
    last.insert(key.clone(), time_ms);
    Ok(())
}

/// Parses a feed file into one series per (asset, date, side), in order of
/// first appearance. Update times must strictly increase within a series.
pub fn parse_feed<R: Read>(input: R) -> Result<Vec<DayAuctionSeries>, IngestError> {
    let mut groups = Groups::new();
    let mut last = HashMap::new();
    each_row(input, FEED_HEADER, |line, row: FeedRow| {
        let key = SeriesKey::new(row.asset, row.date, row.side);
        check_time(&mut last, &key, row.time_ms, line)?;
        if row.indicative_price_ticks.is_none() && row.matched_volume != 0 {
            return Err(schema(line, "matched volume without an indicative price"));
        }
        groups.entry(key).push(IndicativeUpdate {
            time_ms: row.time_ms,
            price: row.indicative_price_ticks,
            matched_volume: row.matched_volume,
            imbalance: row.imbalance,
        });
        Ok(())
    })?;
    Ok(groups
        .groups
        .into_iter()
        .map(|(key, updates)| DayAuctionSeries {
            updates,
            ..DayAuctionSeries::new(key)
        })
        .collect())
}

pub fn write_feed<'a, W: Write>(
    output: W,
    series: impl IntoIterator<Item = &'a DayAuctionSeries>,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    w.write_record(FEED_HEADER).map_err(from_csv)?;
    for s in series {
        for u in &s.updates {
            w.serialize(FeedRow {
                asset: s.key.asset.clone(),
                date: s.key.date,
                side: s.key.side,
                time_ms: u.time_ms,
                indicative_price_ticks: u.price,
                matched_volume: u.matched_volume,
                imbalance: u.imbalance,
            })
            .map_err(from_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn parse_tape<R: Read>(input: R) -> Result<Vec<(SeriesKey, Vec<TapeEvent>)>, IngestError> {
    let mut groups = Groups::new();
    let mut last = HashMap::new();
    each_row(input, TAPE_HEADER, |line, row: TapeRow| {
        let key = SeriesKey::new(row.asset, row.date, row.side);
        check_time(&mut last, &key, row.time_ms, line)?;
        let action = match row.action {
            ActionField::Cancel => TapeAction::Cancel(OrderId(row.order_id)),
            ActionField::Submit => {
                let side = row.buy_sell.ok_or_else(|| schema(line, "submit without buy_sell"))?;
                let size = row.size.ok_or_else(|| schema(line, "submit without size"))?;
                if size == 0 {
                    return Err(schema(line, "size must be positive"));
                }
                let kind = match (row.kind, row.price_ticks) {
                    (Some(KindField::Limit), Some(p)) if p > 0 => OrderKind::Limit(p),
                    (Some(KindField::Market), None) => OrderKind::Market,
                    _ => return Err(schema(line, "limit orders need a positive price, market orders none")),
                };
                TapeAction::Submit(AuctionOrder {
                    id: OrderId(row.order_id),
                    side,
                    kind,
                    size,
                    submit_time: row.time_ms,
                })
            }
        };
        groups.entry(key).push(TapeEvent {
            time_ms: row.time_ms,
            action,
        });
        Ok(())
    })?;
    Ok(groups.groups)
}

pub fn write_tape<'a, W: Write>(
    output: W,
    tapes: impl IntoIterator<Item = (&'a SeriesKey, &'a [TapeEvent])>,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    w.write_record(TAPE_HEADER).map_err(from_csv)?;
    for (key, events) in tapes {
        for e in events {
            let row = match &e.action {
                TapeAction::Cancel(id) => TapeRow {
                    asset: key.asset.clone(),
                    date: key.date,
                    side: key.side,
                    time_ms: e.time_ms,
                    action: ActionField::Cancel,
                    order_id: id.0,
                    buy_sell: None,
                    kind: None,
                    price_ticks: None,
                    size: None,
                },
                TapeAction::Submit(o) => TapeRow {
                    asset: key.asset.clone(),
                    date: key.date,
                    side: key.side,
                    time_ms: e.time_ms,
                    action: ActionField::Submit,
                    order_id: o.id.0,
                    buy_sell: Some(o.side),
                    kind: Some(if o.is_market() { KindField::Market } else { KindField::Limit }),
                    price_ticks: o.price(),
                    size: Some(o.size),
                },
            };
            w.serialize(row).map_err(from_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn parse_quotes<R: Read>(
    input: R,
) -> Result<Vec<(SeriesKey, Vec<QuoteSnapshot>)>, IngestError> {
    let mut groups = Groups::new();
    let mut last = HashMap::new();
    each_row(input, QUOTES_HEADER, |line, row: QuoteRow| {
        let key = SeriesKey::new(row.asset, row.date, row.side);
        check_time(&mut last, &key, row.time_ms, line)?;
        let q = QuoteSnapshot {
            time_ms: row.time_ms,
            bid: row.bid_ticks,
            ask: row.ask_ticks,
            bid_size: row.bid_size,
            ask_size: row.ask_size,
        };
        if !q.is_valid() {
            return Err(schema(line, "quote needs ask > bid and positive sizes"));
        }
        groups.entry(key).push(q);
        Ok(())
    })?;
    Ok(groups.groups)
}

pub fn write_quotes<'a, W: Write>(
    output: W,
    quotes: impl IntoIterator<Item = (&'a SeriesKey, &'a [QuoteSnapshot])>,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    w.write_record(QUOTES_HEADER).map_err(from_csv)?;
    for (key, qs) in quotes {
        for q in qs {
            w.serialize(QuoteRow {
                asset: key.asset.clone(),
                date: key.date,
                side: key.side,
                time_ms: q.time_ms,
                bid_ticks: q.bid,
                ask_ticks: q.ask,
                bid_size: q.bid_size,
                ask_size: q.ask_size,
            })
            .map_err(from_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses daily volumes, rejecting rows whose auction volumes exceed the
/// daily total.
pub fn parse_volumes<R: Read>(input: R) -> Result<Vec<DailyVolume>, IngestError> {
    let rows: Vec<(u64, VolumeRow)> = read_rows(input, VOLUMES_HEADER)?;
    rows.into_iter()
        .map(|(line, row)| {
            let record = DailyVolumeRecord {
                exchange: row.exchange,
                v_open: row.v_open,
                v_close: row.v_close,
                v_total: row.v_total,
                p_open: row.p_open,
                p_close: row.p_close,
                prev_close: row.prev_close,
            };
            if !record.is_consistent() {
                return Err(schema(line, "v_open + v_close exceeds v_total"));
            }
            Ok(DailyVolume {
                asset: row.asset,
                date: row.date,
                record,
            })
        })
        .collect()
}

pub fn write_volumes<'a, W: Write>(
    output: W,
    volumes: impl IntoIterator<Item = &'a DailyVolume>,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    w.write_record(VOLUMES_HEADER).map_err(from_csv)?;
    for v in volumes {
        let r = &v.record;
        w.serialize(VolumeRow {
            asset: v.asset.clone(),
            date: v.date,
            exchange: r.exchange,
            v_open: r.v_open,
            v_close: r.v_close,
            v_total: r.v_total,
            p_open: r.p_open,
            p_close: r.p_close,
            prev_close: r.prev_close,
        })
        .map_err(from_csv)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_auctions<R: Read>(input: R) -> Result<Vec<AuctionRecord>, IngestError> {
    let rows: Vec<(u64, AuctionRow)> = read_rows(input, AUCTIONS_HEADER)?;
    let mut seen = HashMap::new();
    rows.into_iter()
        .map(|(line, row)| {
            let key = SeriesKey::new(row.asset, row.date, row.side);
            if seen.insert(key.clone(), line).is_some() {
                return Err(schema(line, format!("duplicate auction {key}")));
            }
            if row.reference_price_ticks <= 0 {
                return Err(schema(line, "reference price must be positive"));
            }
            if row.restricted_from_ms.is_some_and(|t| t > row.auction_time_ms) {
                return Err(schema(line, "restricted phase starts after the auction"));
            }
            Ok(AuctionRecord {
                key,
                auction_time_ms: row.auction_time_ms,
                restricted_from_ms: row.restricted_from_ms,
                reference_price: row.reference_price_ticks,
                final_price: row.final_price_ticks,
                final_volume: row.final_volume,
            })
        })
        .collect()
}

pub fn write_auctions<'a, W: Write>(
    output: W,
    records: impl IntoIterator<Item = &'a AuctionRecord>,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(output);
    w.write_record(AUCTIONS_HEADER).map_err(from_csv)?;
    for r in records {
        w.serialize(AuctionRow {
            asset: r.key.asset.clone(),
            date: r.key.date,
            side: r.key.side,
            auction_time_ms: r.auction_time_ms,
            restricted_from_ms: r.restricted_from_ms,
            reference_price_ticks: r.reference_price,
            final_price_ticks: r.final_price,
            final_volume: r.final_volume,
        })
        .map_err(from_csv)?;
    }
    w.flush()?;
    Ok(())
}

impl AuctionRecord {
    pub fn of_series(series: &DayAuctionSeries) -> Option<AuctionRecord> {
        Some(AuctionRecord {
            key: series.key.clone(),
            auction_time_ms: series.auction_time_ms?,
            restricted_from_ms: None,
            reference_price: series.reference_price?,
            final_price: series.final_price,
            final_volume: series.final_volume,
        })
    }
}
