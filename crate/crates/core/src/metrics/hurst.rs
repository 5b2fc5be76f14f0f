use serde::{Deserialize, Serialize};

use super::{ln_tick, median, MetricsError};
use crate::ingest::{DayAuctionSeries, MINUTE_MS};
use crate::stats::{fit_loglog_slope, LogLogFit};
use crate::{Real, TimeMs};

/// Slope p-value below which `H < 1/2` counts as sub-diffusive.
pub const SUB_DIFFUSIVE_P: f64 = 1e-3;

/// Median of `D = ln(p^x/π)² / var(returns)` per backward slice of one day.
/// Returns are log-changes between consecutive priced updates; the variance
/// divides by the number of returns. Slice `k` holds updates whose distance
/// to the auction lies in `[k·w, (k+1)·w)`.
pub fn hurst_day<F: Real>(
    series: &DayAuctionSeries,
    width_ms: TimeMs,
    min_updates: usize,
) -> Result<Vec<Option<F>>, MetricsError> {
    assert!(width_ms > 0, "slice width must be positive");
    let key = || series.key.clone();
    let auction = series.auction_time_ms.ok_or_else(|| MetricsError::MissingAuctionTime(key()))?;
    let final_price = series.final_price.ok_or_else(|| MetricsError::MissingFinalPrice(key()))?;
    let priced: Vec<(TimeMs, F)> = series
        .updates
        .iter()
        .filter_map(|u| u.price.map(|p| (u.time_ms, ln_tick::<F>(p))))
        .collect();
    if priced.len() < min_updates || priced.len() < 2 {
        return Err(MetricsError::TooFewUpdates {
            key: key(),
            needed: min_updates.max(2),
            got: priced.len(),
        });
    }
    let returns: Vec<F> = priced.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let n = F::of_usize(returns.len());
    let m = returns.iter().copied().sum::<F>() / n;
    let var = returns.iter().map(|&r| (r - m) * (r - m)).sum::<F>() / n;
    if var <= F::zero() {
        return Err(MetricsError::ZeroVariance(key()));
    }
    let lp = ln_tick::<F>(final_price);
    let mut slices: Vec<Vec<F>> = Vec::new();
    for &(t, x) in &priced {
        let k = ((auction - t).max(0) / width_ms) as usize;
        if slices.len() <= k {
            slices.resize_with(k + 1, Vec::new);
        }
        slices[k].push((lp - x) * (lp - x) / var);
    }
    Ok(slices.iter().map(|v| median(v)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstProfile<F> {
    /// Geometric mean of each slice's time range, in minutes before the
    /// auction.
    pub tau_minutes: Vec<F>,
    /// Median across days of the daily slice medians.
    pub median: Vec<Option<F>>,
    pub days_per_slice: Vec<usize>,
    pub days_used: usize,
    pub skipped_short: usize,
    pub skipped_zero_variance: usize,
    /// Days without an auction time or a final price.
    pub skipped_incomplete: usize,
}

/// `exp` of the mean of `ln τ` over `[k, k+1]`. D grows like a power of τ
/// and every update of the slice enters its median, so the log-log fit needs
/// the slice's geometric centre; the midpoint would bias H upwards through
/// slice 0, whose midpoint is 0.5 while its geometric mean is `1/e`.
fn slice_tau<F: Real>(k: usize) -> F {
    let x_ln_x = |x: F| if x > F::zero() { x * x.ln() } else { F::zero() };
    let k = F::of_usize(k);
    (x_ln_x(k + F::one()) - x_ln_x(k) - F::one()).exp()
}

pub fn hurst_dispersion<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
    min_updates: usize,
) -> HurstProfile<F> {
    let mut profile = HurstProfile {
        tau_minutes: Vec::new(),
        median: Vec::new(),
        days_per_slice: Vec::new(),
        days_used: 0,
        skipped_short: 0,
        skipped_zero_variance: 0,
        skipped_incomplete: 0,
    };
    let mut columns: Vec<Vec<F>> = Vec::new();
    for s in days {
        match hurst_day::<F>(s, width_ms, min_updates) {
            Ok(day) => {
                profile.days_used += 1;
                if columns.len() < day.len() {
                    columns.resize_with(day.len(), Vec::new);
                }
                for (k, v) in day.into_iter().enumerate() {
                    if let Some(v) = v {
                        columns[k].push(v);
                    }
                }
            }
            Err(MetricsError::TooFewUpdates { .. }) => profile.skipped_short += 1,
            Err(MetricsError::ZeroVariance(_)) => profile.skipped_zero_variance += 1,
            Err(_) => profile.skipped_incomplete += 1,
        }
    }
    let w = F::of_int(width_ms) / F::of_int(MINUTE_MS);
    for (k, c) in columns.iter().enumerate() {
        profile.tau_minutes.push(slice_tau::<F>(k) * w);
        profile.median.push(median(c));
        profile.days_per_slice.push(c.len());
    }
    profile
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstFit<F> {
    pub fit: LogLogFit<F>,
    pub sub_diffusive: bool,
    /// Slices left out because their median is missing or not positive.
    pub dropped: usize,
}

/// Log-log fit of the slice medians; slices without a positive median are
/// dropped first since their logarithm is undefined.
pub fn hurst_fit<F: Real>(taus: &[F], medians: &[Option<F>]) -> Result<HurstFit<F>, MetricsError> {
    let (t, v): (Vec<F>, Vec<F>) = taus
        .iter()
        .zip(medians)
        .filter_map(|(&t, m)| m.filter(|&m| m > F::zero()).map(|m| (t, m)))
        .unzip();
    let dropped = taus.len() - t.len();
    let fit = fit_loglog_slope(&t, &v)?;
    Ok(HurstFit {
        sub_diffusive: fit.hurst < F::of(0.5) && fit.p_value < F::of(SUB_DIFFUSIVE_P),
        fit,
        dropped,
    })
}
