use serde::{Deserialize, Serialize};

use super::{mean, median, MetricsError};
use crate::ingest::{DayAuctionSeries, MINUTE_MS};
use crate::stats::{fit_polynomial, vuong_test_fits, VuongCorrection};
use crate::{Real, TimeMs};

/// Per-mark mean and median over days. Mark `k` sits at `(k + 1) · width`
/// after the session start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionCurve<F> {
    pub marks_ms: Vec<TimeMs>,
    pub mean: Vec<F>,
    pub median: Vec<F>,
    pub days: usize,
}

fn horizon(s: &DayAuctionSeries) -> TimeMs {
    s.auction_time_ms
        .or_else(|| s.updates.last().map(|u| u.time_ms + 1))
        .unwrap_or(0)
}

fn marks(days: &[&DayAuctionSeries], width_ms: TimeMs) -> Vec<TimeMs> {
    assert!(width_ms > 0, "slice width must be positive");
    let end = days.iter().map(|s| horizon(s)).max().unwrap_or(0);
    let n = (end + width_ms - 1) / width_ms;
    (1..=n).map(|k| k * width_ms).collect()
}

fn aggregate<F: Real>(marks_ms: Vec<TimeMs>, per_day: Vec<Vec<F>>) -> FractionCurve<F> {
    let mut mean_v = Vec::with_capacity(marks_ms.len());
    let mut median_v = Vec::with_capacity(marks_ms.len());
    for k in 0..marks_ms.len() {
        let column: Vec<F> = per_day.iter().map(|d| d[k]).collect();
        mean_v.push(mean(&column).unwrap_or_else(F::zero));
        median_v.push(median(&column).unwrap_or_else(F::zero));
    }
    FractionCurve {
        marks_ms,
        mean: mean_v,
        median: median_v,
        days: per_day.len(),
    }
}

/// Share of the day's updates at or before each mark, averaged over the
/// days that have at least one update.
pub fn activity_curve<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
) -> FractionCurve<F> {
    let days: Vec<&DayAuctionSeries> = days.into_iter().filter(|s| !s.updates.is_empty()).collect();
    let marks_ms = marks(&days, width_ms);
    let per_day = days
        .iter()
        .map(|s| {
            let total = F::of_usize(s.updates.len());
            marks_ms
                .iter()
                .map(|&t| F::of_usize(s.updates.partition_point(|u| u.time_ms <= t)) / total)
                .collect()
        })
        .collect();
    aggregate(marks_ms, per_day)
}

/// `W(t) / V` with `W` the last matched volume at or before each mark and
/// `V` the final auction volume.
pub fn matched_fraction_curve<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
) -> Result<FractionCurve<F>, MetricsError> {
    let days: Vec<&DayAuctionSeries> = days.into_iter().collect();
    let marks_ms = marks(&days, width_ms);
    let mut per_day = Vec::with_capacity(days.len());
    for s in &days {
        let v = match s.final_volume {
            Some(v) if v > 0 => F::of(v as f64),
            _ => return Err(MetricsError::MissingFinalVolume(s.key.clone())),
        };
        per_day.push(
            marks_ms
                .iter()
                .map(|&t| match s.updates.partition_point(|u| u.time_ms <= t) {
                    0 => F::zero(),
                    i => F::of(s.updates[i - 1].matched_volume as f64) / v,
                })
                .collect(),
        );
    }
    Ok(aggregate(marks_ms, per_day))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveShape {
    Linear,
    Convex,
    Concave,
    Undecidable,
}

impl CurveShape {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveShape::Linear => "linear",
            CurveShape::Convex => "convex",
            CurveShape::Concave => "concave",
            CurveShape::Undecidable => "undecidable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit<F> {
    pub shape: CurveShape,
    /// Vuong statistic, positive when the quadratic is preferred.
    pub statistic: F,
    pub p_value_one_sided: F,
    pub quadratic_coefficient: F,
}

pub const MIN_SHAPE_POINTS: usize = 10;
pub const SHAPE_LEVEL: f64 = 0.05;

/// Degree 1 against degree 2 on the points `(k + 1, curve[k])`, decided by
/// the AIC-penalized Vuong statistic at the 5% level (two-sided).
pub fn curve_shape<F: Real>(curve: &[F]) -> Result<ShapeFit<F>, MetricsError> {
    if curve.len() < MIN_SHAPE_POINTS {
        return Err(crate::stats::StatsError::TooFewPoints {
            needed: MIN_SHAPE_POINTS,
            got: curve.len(),
        }
        .into());
    }
    let xs: Vec<F> = (1..=curve.len()).map(F::of_usize).collect();
    let line = fit_polynomial(&xs, curve, 1)?;
    let quad = fit_polynomial(&xs, curve, 2)?;
    let v = vuong_test_fits(&quad, &line, VuongCorrection::Aic)?;
    let c2 = quad.coefficients[2];
    let shape = match v.decide(F::of(SHAPE_LEVEL)) {
        Some(true) if c2 > F::zero() => CurveShape::Convex,
        Some(true) if c2 < F::zero() => CurveShape::Concave,
        Some(true) => CurveShape::Undecidable,
        Some(false) => CurveShape::Linear,
        None => CurveShape::Undecidable,
    };
    Ok(ShapeFit {
        shape,
        statistic: v.statistic,
        p_value_one_sided: v.p_value_one_sided,
        quadratic_coefficient: c2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfVolumeTime<F> {
    /// Median over days, in minutes since the session start.
    pub median_minutes: Option<F>,
    pub days_used: usize,
    /// Days whose matched volume never reached half the final volume.
    pub days_unreached: usize,
}

/// First time the matched volume reaches half the final volume, median
/// over days.
pub fn half_volume_time<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
) -> Result<HalfVolumeTime<F>, MetricsError> {
    let mut times = Vec::new();
    let mut unreached = 0;
    for s in days {
        let v = match s.final_volume {
            Some(v) if v > 0 => v as u128,
            _ => return Err(MetricsError::MissingFinalVolume(s.key.clone())),
        };
        match s.updates.iter().find(|u| 2 * u.matched_volume as u128 >= v) {
            Some(u) => times.push(F::of_int(u.time_ms) / F::of_int(MINUTE_MS)),
            None => unreached += 1,
        }
    }
    Ok(HalfVolumeTime {
        median_minutes: median(&times),
        days_used: times.len(),
        days_unreached: unreached,
    })
}
