use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{median, MetricsError};
use crate::ingest::{AuctionSide, DailyVolume, DailyVolumeRecord, Exchange};
use crate::Real;

pub fn volume_ratio<F: Real>(record: &DailyVolumeRecord, side: AuctionSide) -> Result<F, MetricsError> {
    if record.v_total == 0 {
        return Err(MetricsError::ZeroTotal);
    }
    Ok(F::of(record.auction_volume(side) as f64) / F::of(record.v_total as f64))
}

/// One exchange × side row of the ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow<F> {
    pub exchange: Exchange,
    pub side: AuctionSide,
    pub mean_log10: F,
    /// Two sample standard deviations of `log10 ρ`; zero for a single record.
    pub two_sd_log10: F,
    /// `10^mean_log10`.
    pub typical: F,
    pub n: usize,
    /// Records with `ρ = 0` or a zero total, left out of the moments.
    pub excluded: usize,
}

/// `log10 ρ` moments per exchange and side, in `Exchange::ALL` ×
/// `AuctionSide::BOTH` order. Groups without any record are omitted; a group
/// whose records all have `ρ = 0` is an error.
pub fn ratio_summary<F: Real>(records: &[DailyVolume]) -> Result<Vec<RatioRow<F>>, MetricsError> {
    let mut rows = Vec::new();
    for exchange in Exchange::ALL {
        for side in AuctionSide::BOTH {
            let group: Vec<&DailyVolumeRecord> = records
                .iter()
                .map(|r| &r.record)
                .filter(|r| r.exchange == exchange)
                .collect();
            if group.is_empty() {
                continue;
            }
            let logs: Vec<F> = group
                .iter()
                .filter_map(|r| volume_ratio::<F>(r, side).ok())
                .filter(|&rho| rho > F::zero())
                .map(|rho| rho.log10())
                .collect();
            if logs.is_empty() {
                return Err(MetricsError::EmptyGroup { exchange, side });
            }
            let mean = super::mean(&logs).expect("non-empty");
            rows.push(RatioRow {
                exchange,
                side,
                mean_log10: mean,
                two_sd_log10: F::of(2.0) * super::sample_sd(&logs),
                typical: F::of(10.0).powf(mean),
                n: logs.len(),
                excluded: group.len() - logs.len(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyRatio<F> {
    pub exchange: Exchange,
    pub side: AuctionSide,
    pub year: i32,
    pub month: u32,
    pub median: F,
    /// Distinct assets seen in the month.
    pub assets: usize,
    pub records: usize,
}

/// Median `ρ` over all asset-days of each exchange, side and calendar month.
/// Months with fewer than `min_assets` distinct assets are dropped, as are
/// records with a zero total.
pub fn monthly_median_ratio<F: Real>(records: &[DailyVolume], min_assets: usize) -> Vec<MonthlyRatio<F>> {
    type Bucket<'a, F> = (BTreeSet<&'a str>, Vec<F>);
    let mut buckets: BTreeMap<(Exchange, AuctionSide, i32, u32), Bucket<F>> = BTreeMap::new();
    for r in records {
        for side in AuctionSide::BOTH {
            let Ok(rho) = volume_ratio::<F>(&r.record, side) else {
                continue;
            };
            let b = buckets
                .entry((r.record.exchange, side, r.date.year(), r.date.month()))
                .or_default();
            b.0.insert(&r.asset);
            b.1.push(rho);
        }
    }
    buckets
        .into_iter()
        .filter(|(_, (assets, _))| assets.len() >= min_assets)
        .map(|((exchange, side, year, month), (assets, values))| MonthlyRatio {
            exchange,
            side,
            year,
            month,
            median: median(&values).expect("non-empty bucket"),
            assets: assets.len(),
            records: values.len(),
        })
        .collect()
}
