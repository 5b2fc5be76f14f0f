use serde::{Deserialize, Serialize};

use super::{Proportion, MIN_SUPPORT};
use crate::ingest::DayAuctionSeries;
use crate::{Real, TimeMs};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionForm {
    /// `sign(I_t) · sign(I_{t+1} - I_t) = -1`: the next event moves the
    /// imbalance towards the other side.
    #[default]
    Standard,
    /// `sign(I_{t+1} · (I_t - I_{t-1})) = -1`.
    Literal,
}

fn sign(x: i64) -> i64 {
    x.signum()
}

/// Per forward slice counts of one day. A transition is sliced by the time
/// of the update that reveals it; pairs with a zero factor are skipped.
pub fn daily_reduction_counts(series: &DayAuctionSeries, width_ms: TimeMs, form: ReductionForm) -> Vec<Proportion> {
    assert!(width_ms > 0, "slice width must be positive");
    let mut out: Vec<Proportion> = Vec::new();
    let u = &series.updates;
    let start = match form {
        ReductionForm::Standard => 1,
        ReductionForm::Literal => 2,
    };
    for j in start..u.len() {
        let (level, change) = match form {
            ReductionForm::Standard => (u[j - 1].imbalance, u[j].imbalance - u[j - 1].imbalance),
            ReductionForm::Literal => (u[j].imbalance, u[j - 1].imbalance - u[j - 2].imbalance),
        };
        let product = sign(level) * sign(change);
        if product == 0 {
            continue;
        }
        let k = (u[j].time_ms.max(0) / width_ms) as usize;
        if out.len() <= k {
            out.resize(k + 1, Proportion::default());
        }
        out[k].record(product == -1);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionProfile<F> {
    /// Counts pooled over days, per forward slice.
    pub slices: Vec<Proportion>,
    /// Mean over days of each day's pooled probability.
    pub overall: Option<F>,
    /// Days with at least one qualifying transition.
    pub days: usize,
}

impl<F: Real> ReductionProfile<F> {
    pub fn slice_value(&self, k: usize) -> Option<F> {
        self.slices.get(k).and_then(|p| p.value())
    }

    pub fn low_support(&self, k: usize) -> bool {
        self.slices.get(k).is_none_or(|p| p.count < MIN_SUPPORT)
    }
}

pub fn imbalance_reduction_prob<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
    form: ReductionForm,
) -> ReductionProfile<F> {
    let mut slices: Vec<Proportion> = Vec::new();
    let mut daily: Vec<F> = Vec::new();
    for s in days {
        let counts = daily_reduction_counts(s, width_ms, form);
        let mut day = Proportion::default();
        if slices.len() < counts.len() {
            slices.resize(counts.len(), Proportion::default());
        }
        for (k, c) in counts.into_iter().enumerate() {
            slices[k].merge(c);
            day.merge(c);
        }
        if let Some(v) = day.value() {
            daily.push(v);
        }
    }
    ReductionProfile {
        slices,
        overall: super::mean(&daily),
        days: daily.len(),
    }
}
