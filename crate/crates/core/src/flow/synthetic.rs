//! Hand-built indicative series with known dynamics: Brownian and
//! Ornstein-Uhlenbeck log-prices, optionally quoted around a fixed mid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::book::IndicativeUpdate;
use crate::ingest::{DayAuctionSeries, QuoteSnapshot, SeriesKey};
use crate::{Shares, Tick, TimeMs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub updates: usize,
    /// Updates sit on a regular grid over `[0, duration_ms)`; the auction
    /// happens at `duration_ms`.
    pub duration_ms: TimeMs,
    /// Price level, in ticks, that log-price zero maps to.
    pub level: Tick,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec {
            updates: 600,
            duration_ms: 600_000,
            level: 1_000_000,
        }
    }
}

fn grid(spec: &PathSpec) -> Vec<TimeMs> {
    (0..spec.updates)
        .map(|k| (k as i128 * spec.duration_ms as i128 / spec.updates as i128) as TimeMs)
        .collect()
}

/// Series whose indicative prices are `level * exp(path[k])` and whose final
/// price is `level * exp(final_log)`. Matched volume grows by one share per
/// update and the imbalance alternates in sign.
pub fn series_from_log_path(
    key: SeriesKey,
    spec: &PathSpec,
    path: &[f64],
    final_log: f64,
) -> DayAuctionSeries {
    let to_ticks = |x: f64| ((spec.level as f64) * x.exp()).round().max(1.0) as Tick;
    let times = grid(spec);
    let updates = times
        .iter()
        .zip(path)
        .enumerate()
        .map(|(k, (&t, &x))| IndicativeUpdate {
            time_ms: t,
            price: Some(to_ticks(x)),
            matched_volume: k as Shares + 1,
            imbalance: if k % 2 == 0 { 10 } else { -10 },
        })
        .collect::<Vec<_>>();
    let total = updates.len() as Shares;
    DayAuctionSeries {
        key,
        auction_time_ms: Some(spec.duration_ms),
        reference_price: Some(spec.level),
        updates,
        final_price: Some(to_ticks(final_log)),
        final_volume: Some(total.max(1)),
        quotes: Vec::new(),
    }
}

/// Gaussian random walk in log-price with step `sigma`; the final price is
/// one more step after the last update.
pub fn brownian_day(key: SeriesKey, spec: &PathSpec, sigma: f64, seed: u64) -> DayAuctionSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    let mut path = Vec::with_capacity(spec.updates);
    for _ in 0..spec.updates {
        path.push(x);
        let z: f64 = StandardNormal.sample(&mut rng);
        x += sigma * z;
    }
    series_from_log_path(key, spec, &path, x)
}

/// Discrete Ornstein-Uhlenbeck log-price around zero,
/// `x' = (1 - theta) x + sigma z`, started at zero; the final price is one
/// more step after the last update.
pub fn ou_path(updates: usize, theta: f64, sigma: f64, seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    let mut path = Vec::with_capacity(updates);
    for _ in 0..updates {
        path.push(x);
        let z: f64 = StandardNormal.sample(&mut rng);
        x = (1.0 - theta) * x + sigma * z;
    }
    (path, x)
}

pub fn ou_day(
    key: SeriesKey,
    spec: &PathSpec,
    theta: f64,
    sigma: f64,
    seed: u64,
) -> DayAuctionSeries {
    let (path, last) = ou_path(spec.updates, theta, sigma, seed);
    series_from_log_path(key, spec, &path, last)
}

/// Indicative price following an OU process in ticks around a constant
/// mid, with a constant quote `mid ± half_spread` aligned to every update.
pub fn ou_quoted_day(
    key: SeriesKey,
    spec: &PathSpec,
    half_spread: Tick,
    theta: f64,
    sigma_ticks: f64,
    seed: u64,
) -> DayAuctionSeries {
    let (path, last) = ou_path(spec.updates, theta, sigma_ticks, seed);
    let mid = spec.level;
    let mut series = series_from_log_path(key, spec, &[], 0.0);
    series.updates = grid(spec)
        .into_iter()
        .zip(&path)
        .enumerate()
        .map(|(k, (t, &x))| IndicativeUpdate {
            time_ms: t,
            price: Some((mid + x.round() as Tick).max(1)),
            matched_volume: k as Shares + 1,
            imbalance: if k % 2 == 0 { 10 } else { -10 },
        })
        .collect();
    series.final_price = Some((mid + last.round() as Tick).max(1));
    series.final_volume = Some(spec.updates.max(1) as Shares);
    let quote = QuoteSnapshot {
        time_ms: 0,
        bid: mid - half_spread,
        ask: mid + half_spread,
        bid_size: 100,
        ask_size: 100,
    };
    series.quotes = vec![Some(quote); series.updates.len()];
    series
}
