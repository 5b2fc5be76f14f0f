use serde::{Deserialize, Serialize};

use super::{classify_event, ln_tick, median, sample_sd, EventKind, MIN_SUPPORT};
use crate::ingest::DayAuctionSeries;
use crate::{Real, TimeMs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSide {
    NewOrder,
    Cancellation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Unconditional,
    Improving,
    Worsening,
}

impl ResponseSide {
    pub const BOTH: [ResponseSide; 2] = [ResponseSide::NewOrder, ResponseSide::Cancellation];

    pub fn as_str(self) -> &'static str {
        match self {
            ResponseSide::NewOrder => "new_order",
            ResponseSide::Cancellation => "cancellation",
        }
    }
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Unconditional, Condition::Improving, Condition::Worsening];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Unconditional => "unconditional",
            Condition::Improving => "improving",
            Condition::Worsening => "worsening",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseBin<F> {
    pub slice: usize,
    pub median: Option<F>,
    /// Two sample standard deviations.
    pub dispersion: F,
    pub count: usize,
    pub low_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve<F> {
    pub side: ResponseSide,
    pub condition: Condition,
    pub bins: Vec<ResponseBin<F>>,
}

/// `ε · ln(p^x / π(t_i))` for every new order and cancellation, binned by
/// the forward slice of the update preceding the event. Days without a
/// final price contribute nothing. Curves come in `ResponseSide::BOTH` ×
/// `Condition::ALL` order.
pub fn response_curves<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
) -> Vec<ResponseCurve<F>> {
    assert!(width_ms > 0, "slice width must be positive");
    // samples[side][condition][slice]
    let mut samples: [[Vec<Vec<F>>; 3]; 2] = Default::default();
    let mut n_slices = 0;
    for s in days {
        let Some(px) = s.final_price else { continue };
        let lp = ln_tick::<F>(px);
        for w in s.updates.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let Some(pi) = prev.price else { continue };
            let class = classify_event(prev, next);
            let side = match class.kind {
                EventKind::NewBuy | EventKind::NewSell => 0,
                EventKind::Cancel => 1,
                EventKind::Indeterminate => continue,
            };
            let value = F::of_int(class.sign.into()) * (lp - ln_tick::<F>(pi));
            let k = (prev.time_ms.max(0) / width_ms) as usize;
            n_slices = n_slices.max(k + 1);
            let mut push = |c: usize| {
                let bins = &mut samples[side][c];
                if bins.len() <= k {
                    bins.resize_with(k + 1, Vec::new);
                }
                bins[k].push(value);
            };
            push(0);
            match class.improves {
                Some(true) => push(1),
                Some(false) => push(2),
                None => {}
            }
        }
    }
    let mut curves = Vec::with_capacity(6);
    for (si, side) in ResponseSide::BOTH.into_iter().enumerate() {
        for (ci, condition) in Condition::ALL.into_iter().enumerate() {
            let cols = &samples[si][ci];
            let bins = (0..n_slices)
                .map(|k| {
                    let v: &[F] = cols.get(k).map_or(&[], |c| c.as_slice());
                    ResponseBin {
                        slice: k,
                        median: median(v),
                        dispersion: F::of(2.0) * sample_sd(v),
                        count: v.len(),
                        low_support: v.len() < MIN_SUPPORT,
                    }
                })
                .collect();
            curves.push(ResponseCurve {
                side,
                condition,
                bins,
            });
        }
    }
    curves
}
