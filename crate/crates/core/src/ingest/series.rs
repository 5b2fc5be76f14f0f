use std::fmt;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::book::IndicativeUpdate;
use crate::{Shares, Tick, TimeMs};

/// One-minute slices, in milliseconds.
pub const MINUTE_MS: TimeMs = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuctionSide {
    Open,
    Close,
}

impl AuctionSide {
    pub const BOTH: [AuctionSide; 2] = [AuctionSide::Open, AuctionSide::Close];

    pub fn as_str(self) -> &'static str {
        match self {
            AuctionSide::Open => "open",
            AuctionSide::Close => "close",
        }
    }
}

impl fmt::Display for AuctionSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Exchange {
    #[serde(rename = "ARCA")]
    Arca,
    #[serde(rename = "NASDAQ")]
    Nasdaq,
    #[serde(rename = "NYSE")]
    Nyse,
}

impl Exchange {
    pub const ALL: [Exchange; 3] = [Exchange::Arca, Exchange::Nasdaq, Exchange::Nyse];

    pub fn as_str(self) -> &'static str {
        match self {
            Exchange::Arca => "ARCA",
            Exchange::Nasdaq => "NASDAQ",
            Exchange::Nyse => "NYSE",
        }
    }
}

impl fmt::Display for Exchange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one auction: asset, trading date and open/close.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub asset: String,
    pub date: NaiveDate,
    pub side: AuctionSide,
}

impl SeriesKey {
    pub fn new(asset: impl Into<String>, date: NaiveDate, side: AuctionSide) -> Self {
        SeriesKey {
            asset: asset.into(),
            date,
            side,
        }
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.asset, self.date, self.side)
    }
}

/// Best quotes of the regular book.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteSnapshot {
    pub time_ms: TimeMs,
    pub bid: Tick,
    pub ask: Tick,
    pub bid_size: Shares,
    pub ask_size: Shares,
}

impl QuoteSnapshot {
    pub fn is_valid(&self) -> bool {
        self.ask > self.bid && self.bid_size > 0 && self.ask_size > 0
    }
}

/// All indicative updates of one auction plus its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAuctionSeries {
    pub key: SeriesKey,
    /// Auction time; unknown until the auction record is attached.
    pub auction_time_ms: Option<TimeMs>,
    pub reference_price: Option<Tick>,
    pub updates: Vec<IndicativeUpdate>,
    pub final_price: Option<Tick>,
    pub final_volume: Option<Shares>,
    /// Quote in force at each update, parallel to `updates`. Empty when no
    /// quotes were aligned.
    pub quotes: Vec<Option<QuoteSnapshot>>,
}

impl DayAuctionSeries {
    pub fn new(key: SeriesKey) -> Self {
        DayAuctionSeries {
            key,
            auction_time_ms: None,
            reference_price: None,
            updates: Vec::new(),
            final_price: None,
            final_volume: None,
            quotes: Vec::new(),
        }
    }

    pub fn has_quotes(&self) -> bool {
        !self.quotes.is_empty()
    }

    /// Number of updates carrying a price.
    pub fn price_update_count(&self) -> usize {
        self.updates.iter().filter(|u| u.price.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DailyVolumeRecord {
    pub exchange: Exchange,
    pub v_open: Shares,
    pub v_close: Shares,
    pub v_total: Shares,
    pub p_open: Tick,
    pub p_close: Tick,
    pub prev_close: Tick,
}

/// A [`DailyVolumeRecord`] together with its asset and date.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DailyVolume {
    pub asset: String,
    pub date: NaiveDate,
    pub record: DailyVolumeRecord,
}

impl DailyVolumeRecord {
    pub fn auction_volume(&self, side: AuctionSide) -> Shares {
        match side {
            AuctionSide::Open => self.v_open,
            AuctionSide::Close => self.v_close,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.v_open
            .checked_add(self.v_close)
            .is_some_and(|s| s <= self.v_total)
    }
}

/// Annotates every update with the latest quote at or before its time.
/// Updates preceding the first quote get `None`.
pub fn align_quotes(mut series: DayAuctionSeries, quotes: &[QuoteSnapshot]) -> DayAuctionSeries {
    let mut aligned = Vec::with_capacity(series.updates.len());
    let mut next = 0;
    for u in &series.updates {
        while next < quotes.len() && quotes[next].time_ms <= u.time_ms {
            next += 1;
        }
        aligned.push(next.checked_sub(1).map(|i| quotes[i]));
    }
    series.quotes = aligned;
    series
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceDirection {
    /// Slice `k` covers `[k, k+1)` widths from the session start.
    Forward,
    /// Slice `k` covers updates with `t_x - t` in `[k, k+1)` widths.
    Backward,
}

/// Index ranges of `series.updates` per slice of `width_ms`. Entry `k` is
/// slice `k`, possibly empty. Backward slicing needs the auction time and
/// returns `None` without it.
pub fn slice_updates(
    series: &DayAuctionSeries,
    direction: SliceDirection,
    width_ms: TimeMs,
) -> Option<Vec<Range<usize>>> {
    assert!(width_ms > 0, "slice width must be positive");
    let slice_of = |t: TimeMs| -> usize {
        match direction {
            SliceDirection::Forward => t.max(0) / width_ms,
            SliceDirection::Backward => {
                (series.auction_time_ms.expect("checked") - t).max(0) / width_ms
            }
        }
        .try_into()
        .expect("non-negative")
    };
    if direction == SliceDirection::Backward && series.auction_time_ms.is_none() {
        return None;
    }
    let n = series.updates.len();
    let Some(last) = series.updates.iter().map(|u| slice_of(u.time_ms)).max() else {
        return Some(Vec::new());
    };
    let mut ranges = vec![0..0; last + 1];
    let mut start = 0;
    while start < n {
        let k = slice_of(series.updates[start].time_ms);
        let mut end = start + 1;
        while end < n && slice_of(series.updates[end].time_ms) == k {
            end += 1;
        }
        ranges[k] = start..end;
        start = end;
    }
    Some(ranges)
}

/// One-minute slicing.
pub fn slice_minutes(
    series: &DayAuctionSeries,
    direction: SliceDirection,
) -> Option<Vec<Range<usize>>> {
    slice_updates(series, direction, MINUTE_MS)
}
