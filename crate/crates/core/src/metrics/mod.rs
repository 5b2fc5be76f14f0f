//! Pre-auction estimators: volume ratios, activity and matched-fraction
//! curves, price dispersion scaling, imbalance reduction, response functions
//! and indicative-versus-quote metrics.
//!
//! Estimators that work "per asset" take the day series of one asset and one
//! auction side; grouping is the caller's business.

mod curves;
mod events;
mod hurst;
mod reduction;
mod response;
mod spread;
#[cfg(test)]
mod tests;
mod volume;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AuctionSide, Exchange, SeriesKey};
use crate::stats::StatsError;
use crate::Real;

pub use curves::{
    activity_curve, curve_shape, half_volume_time, matched_fraction_curve, CurveShape,
    FractionCurve, HalfVolumeTime, ShapeFit,
};
pub use events::{classify_event, EventClass, EventKind};
pub use hurst::{
    hurst_day, hurst_dispersion, hurst_fit, HurstFit, HurstProfile, SUB_DIFFUSIVE_P,
};
pub use reduction::{
    daily_reduction_counts, imbalance_reduction_prob, ReductionForm, ReductionProfile,
};
pub use response::{
    response_curves, Condition, ResponseBin, ResponseCurve, ResponseSide,
};
pub use spread::{spread_metrics, SpreadRow, SpreadTable};
pub use volume::{
    monthly_median_ratio, ratio_summary, volume_ratio, MonthlyRatio, RatioRow,
};

/// Slices with fewer qualifying events than this are flagged low-support.
pub const MIN_SUPPORT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("total daily volume is zero")]
    ZeroTotal,
    #[error("no positive volume ratio for {exchange} {side}")]
    EmptyGroup {
        exchange: Exchange,
        side: AuctionSide,
    },
    #[error("{0}: final auction volume missing or zero")]
    MissingFinalVolume(SeriesKey),
    #[error("{0}: final auction price missing")]
    MissingFinalPrice(SeriesKey),
    #[error("{0}: auction time missing")]
    MissingAuctionTime(SeriesKey),
    #[error("{0}: indicative price never moves")]
    ZeroVariance(SeriesKey),
    #[error("{key}: {got} price updates, need {needed}")]
    TooFewUpdates {
        key: SeriesKey,
        needed: usize,
        got: usize,
    },
    #[error("no series carries quote annotations")]
    NoQuotes,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Counted outcome of a yes/no event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: usize,
    pub count: usize,
}

impl Proportion {
    pub fn record(&mut self, hit: bool) {
        self.count += 1;
        self.hits += usize::from(hit);
    }

    pub fn merge(&mut self, other: Proportion) {
        self.hits += other.hits;
        self.count += other.count;
    }

    pub fn value<F: Real>(self) -> Option<F> {
        (self.count > 0).then(|| F::of_usize(self.hits) / F::of_usize(self.count))
    }
}

/// Median with the mean of the two central values for even sizes. NaNs are
/// not expected and sort last.
pub fn median<F: Real>(values: &[F]) -> Option<F> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / F::of(2.0)
    })
}

pub fn mean<F: Real>(values: &[F]) -> Option<F> {
    (!values.is_empty()).then(|| values.iter().copied().sum::<F>() / F::of_usize(values.len()))
}

/// Sample standard deviation; zero below two points.
pub fn sample_sd<F: Real>(values: &[F]) -> F {
    let n = values.len();
    if n < 2 {
        return F::zero();
    }
    let m = values.iter().copied().sum::<F>() / F::of_usize(n);
    let ss: F = values.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / F::of_usize(n - 1)).sqrt()
}

fn ln_tick<F: Real>(p: crate::Tick) -> F {
    F::of_int(p).ln()
}
