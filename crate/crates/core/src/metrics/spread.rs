use serde::{Deserialize, Serialize};

use super::{mean, median, MetricsError, Proportion};
use crate::ingest::{DayAuctionSeries, QuoteSnapshot};
use crate::{Real, Tick, TimeMs};

/// Indicative-versus-quote statistics over a set of updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow<F> {
    /// Forward slice, `None` for the whole session.
    pub slice: Option<usize>,
    /// Updates with both an indicative price and a usable quote.
    pub updates: usize,
    pub in_spread: usize,
    pub above: usize,
    pub below: usize,
    /// `|π - m| / m`.
    pub delta_m_mean: Option<F>,
    pub delta_m_median: Option<F>,
    /// `|π - m| / (a - b)` while `π` is outside the spread.
    pub delta_s_mean: Option<F>,
    pub delta_s_median: Option<F>,
    /// The next indicative move goes back towards the mid.
    pub reversion: Proportion,
    /// From outside the spread, the next indicative price lands on the other
    /// side of the mid.
    pub overshoot: Proportion,
    /// `hits`: strictly closer to the size-weighted mid than to the mid.
    pub weighted_mid: Proportion,
    /// Equidistant from both mids; included in `weighted_mid.count`.
    pub weighted_mid_ties: usize,
}

impl<F: Real> SpreadRow<F> {
    fn share(&self, n: usize) -> Option<F> {
        (self.updates > 0).then(|| F::of_usize(n) / F::of_usize(self.updates))
    }

    pub fn time_in_spread(&self) -> Option<F> {
        self.share(self.in_spread)
    }

    pub fn time_above(&self) -> Option<F> {
        self.share(self.above)
    }

    pub fn time_below(&self) -> Option<F> {
        self.share(self.below)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadTable<F> {
    pub slices: Vec<SpreadRow<F>>,
    pub overall: SpreadRow<F>,
    /// Every `δ_m` of the session, ascending.
    pub delta_m: Vec<F>,
}

impl<F: Real> SpreadTable<F> {
    /// `(x, P[δ_m ≥ x])` at each distinct observed value.
    pub fn delta_m_ccdf(&self) -> Vec<(F, F)> {
        let n = F::of_usize(self.delta_m.len());
        let mut out: Vec<(F, F)> = Vec::new();
        for (i, &x) in self.delta_m.iter().enumerate() {
            if out.last().is_none_or(|&(prev, _)| prev != x) {
                out.push((x, F::of_usize(self.delta_m.len() - i) / n));
            }
        }
        out
    }
}

#[derive(Default)]
struct Acc<F> {
    updates: usize,
    in_spread: usize,
    above: usize,
    below: usize,
    delta_m: Vec<F>,
    delta_s: Vec<F>,
    reversion: Proportion,
    overshoot: Proportion,
    weighted_mid: Proportion,
    ties: usize,
}

impl<F: Real> Acc<F> {
    fn merge(&mut self, o: &Acc<F>) {
        self.updates += o.updates;
        self.in_spread += o.in_spread;
        self.above += o.above;
        self.below += o.below;
        self.delta_m.extend_from_slice(&o.delta_m);
        self.delta_s.extend_from_slice(&o.delta_s);
        self.reversion.merge(o.reversion);
        self.overshoot.merge(o.overshoot);
        self.weighted_mid.merge(o.weighted_mid);
        self.ties += o.ties;
    }

    fn row(&self, slice: Option<usize>) -> SpreadRow<F> {
        SpreadRow {
            slice,
            updates: self.updates,
            in_spread: self.in_spread,
            above: self.above,
            below: self.below,
            delta_m_mean: mean(&self.delta_m),
            delta_m_median: median(&self.delta_m),
            delta_s_mean: mean(&self.delta_s),
            delta_s_median: median(&self.delta_s),
            reversion: self.reversion,
            overshoot: self.overshoot,
            weighted_mid: self.weighted_mid,
            weighted_mid_ties: self.ties,
        }
    }
}

/// Indicative price and quote at one update, in exact integer form.
#[derive(Clone, Copy)]
struct Point {
    price: Tick,
    q: QuoteSnapshot,
}

impl Point {
    /// `2 (π - m)`.
    fn dev2(&self) -> i128 {
        2 * self.price as i128 - (self.q.ask as i128 + self.q.bid as i128)
    }

    fn outside(&self) -> bool {
        self.price > self.q.ask || self.price < self.q.bid
    }
}

fn point(series: &DayAuctionSeries, i: usize) -> Option<Point> {
    let price = series.updates[i].price?;
    let q = series.quotes.get(i).copied().flatten().filter(QuoteSnapshot::is_valid)?;
    Some(Point { price, q })
}

/// Six indicative-versus-quote metrics per forward slice and overall, from
/// updates carrying both an indicative price and a quote with `a > b` and
/// positive sizes. Pair metrics use consecutive updates of a day and are
/// sliced by the earlier one.
pub fn spread_metrics<'a, F: Real>(
    days: impl IntoIterator<Item = &'a DayAuctionSeries>,
    width_ms: TimeMs,
) -> Result<SpreadTable<F>, MetricsError> {
    assert!(width_ms > 0, "slice width must be positive");
    let mut slices: Vec<Acc<F>> = Vec::new();
    let mut quoted = false;
    for s in days {
        if !s.has_quotes() {
            continue;
        }
        quoted = true;
        let points: Vec<Option<Point>> = (0..s.updates.len()).map(|i| point(s, i)).collect();
        for (i, p) in points.iter().enumerate() {
            let Some(p) = *p else { continue };
            let k = (s.updates[i].time_ms.max(0) / width_ms) as usize;
            if slices.len() <= k {
                slices.resize_with(k + 1, Acc::default);
            }
            let acc = &mut slices[k];
            let (a, b) = (p.q.ask as i128, p.q.bid as i128);
            let d2 = p.dev2();
            acc.updates += 1;
            if p.price > p.q.ask {
                acc.above += 1;
            } else if p.price < p.q.bid {
                acc.below += 1;
            } else {
                acc.in_spread += 1;
            }
            acc.delta_m.push(F::of(d2.unsigned_abs() as f64) / F::of((a + b) as f64));
            if p.outside() {
                acc.delta_s.push(F::of(d2.unsigned_abs() as f64) / F::of((2 * (a - b)) as f64));
            }

            let (va, vb) = (p.q.ask_size as i128, p.q.bid_size as i128);
            let lhs = d2.abs() * (va + vb);
            let rhs = 2 * (p.price as i128 * (va + vb) - (va * a + vb * b)).abs();
            acc.weighted_mid.record(lhs > rhs);
            acc.ties += usize::from(lhs == rhs);

            if let Some(next_price) = s.updates.get(i + 1).and_then(|u| u.price) {
                if d2 != 0 && next_price != p.price {
                    acc.reversion
                        .record((next_price as i128 - p.price as i128) * d2 < 0);
                }
            }
            if p.outside() {
                if let Some(Some(next)) = points.get(i + 1) {
                    acc.overshoot.record(next.dev2() * d2 < 0);
                }
            }
        }
    }
    if !quoted {
        return Err(MetricsError::NoQuotes);
    }
    let mut total = Acc::default();
    for acc in &slices {
        total.merge(acc);
    }
    let mut delta_m = total.delta_m.clone();
    delta_m.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SpreadTable {
        slices: slices.iter().enumerate().map(|(k, acc)| acc.row(Some(k))).collect(),
        overall: total.row(None),
        delta_m,
    })
}
