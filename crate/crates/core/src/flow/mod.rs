//! Reproducible synthetic pre-auction order flow.
//!
//! A day is generated by drawing event times from an inhomogeneous Poisson
//! process (thinning), then deciding each event against the live book: a
//! cancellation of a resident order, or a new order whose side opposes the
//! current imbalance with probability `contrarian_prob`. The same
//! [`Session`] drives both generation and replay, so replaying a generated
//! tape reproduces the generated feed exactly.

mod panel;
mod quotes;
pub mod synthetic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal, Pareto};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{
    AuctionBook, AuctionOrder, AuctionResult, BookError, IndicativeUpdate, OrderId, Phase, Side,
};
use crate::ingest::{DayAuctionSeries, QuoteSnapshot, SeriesKey, TapeAction, TapeEvent};
use crate::{Shares, Tick, TimeMs};

pub use panel::{asset_name, gen_volume_panel, listing, trading_days, PanelParams, RatioLaw};
pub use quotes::{gen_quotes, QuoteParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Book(#[from] BookError),
}

fn invalid(msg: impl Into<String>) -> FlowError {
    FlowError::InvalidParams(msg.into())
}

/// Shape of the arrival rate over the session, as a multiplier of the base
/// rate at relative time `u = t / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RateProfile {
    Constant,
    /// `1 + slope * u`
    Linear { slope: f64 },
    /// `1 + curvature * u^2`
    Convex { curvature: f64 },
}

impl RateProfile {
    pub fn factor(&self, u: f64) -> f64 {
        match *self {
            RateProfile::Constant => 1.0,
            RateProfile::Linear { slope } => 1.0 + slope * u,
            RateProfile::Convex { curvature } => 1.0 + curvature * u * u,
        }
    }

    /// Largest factor on `[0, 1]`; both shapes are monotone.
    fn max_factor(&self) -> f64 {
        self.factor(0.0).max(self.factor(1.0))
    }

    fn min_factor(&self) -> f64 {
        self.factor(0.0).min(self.factor(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SizeDist {
    LogNormal { mu: f64, sigma: f64 },
    /// Density `∝ x^-alpha` above `xmin`.
    Pareto { alpha: f64, xmin: f64 },
}

/// Where limit orders are centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Around the fundamental (or the quote mid when quotes drive it).
    Fundamental,
    /// Around the current indicative price, falling back to the fundamental.
    Indicative,
}

/// A window before the auction with its own cancellation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CancelBurst {
    pub seconds_before_auction: f64,
    pub cancel_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub duration_s: f64,
    /// Events per second at the session start.
    pub base_rate: f64,
    pub profile: RateProfile,
    pub contrarian_prob: f64,
    pub cancel_prob: f64,
    pub market_prob: f64,
    pub size_dist: SizeDist,
    /// Sizes are scaled by `1 + size_growth * t / T`.
    pub size_growth: f64,
    /// Standard deviation of limit prices around the fundamental, in ticks.
    pub price_dispersion: f64,
    pub placement: Placement,
    pub fundamental: Tick,
    pub reference_price: Tick,
    /// Restricted phase length before the auction.
    pub cutoff_s: Option<f64>,
    pub cancel_burst: Option<CancelBurst>,
    /// Size of the crossing buy/sell pair placed at the start; 0 disables it.
    pub anchor_size: Shares,
    pub quotes: QuoteParams,
    pub seed: u64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            duration_s: 600.0,
            base_rate: 2.0,
            profile: RateProfile::Convex { curvature: 4.0 },
            contrarian_prob: 0.55,
            cancel_prob: 0.2,
            market_prob: 0.2,
            size_dist: SizeDist::LogNormal {
                mu: 200f64.ln(),
                sigma: 1.0,
            },
            size_growth: 0.0,
            price_dispersion: 5.0,
            placement: Placement::Fundamental,
            fundamental: 10_000,
            reference_price: 10_000,
            cutoff_s: None,
            cancel_burst: None,
            anchor_size: 100,
            quotes: QuoteParams::default(),
            seed: 0,
        }
    }
}

fn prob(name: &str, p: f64, allow_one: bool) -> Result<(), FlowError> {
    let ok = p >= 0.0 && (p < 1.0 || allow_one && p == 1.0);
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {p} outside its range")))
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration must be positive"));
        }
        if !(self.base_rate > 0.0 && self.base_rate.is_finite()) {
            return Err(invalid("base rate must be positive"));
        }
        if !(self.profile.min_factor() > 0.0 && self.profile.max_factor().is_finite()) {
            return Err(invalid("rate profile must stay positive"));
        }
        prob("contrarian_prob", self.contrarian_prob, true)?;
        prob("cancel_prob", self.cancel_prob, false)?;
        prob("market_prob", self.market_prob, true)?;
        if let Some(b) = self.cancel_burst {
            prob("burst cancel_prob", b.cancel_prob, false)?;
            if !(b.seconds_before_auction > 0.0) {
                return Err(invalid("burst window must be positive"));
            }
        }
        match self.size_dist {
            SizeDist::LogNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("lognormal sizes need finite mu and sigma > 0"));
                }
            }
            SizeDist::Pareto { alpha, xmin } => {
                if !(alpha > 1.0 && xmin > 0.0 && alpha.is_finite() && xmin.is_finite()) {
                    return Err(invalid("pareto sizes need alpha > 1 and xmin > 0"));
                }
            }
        }
        if !(self.size_growth >= 0.0 && self.size_growth.is_finite()) {
            return Err(invalid("size growth must be non-negative"));
        }
        if !(self.price_dispersion >= 0.0 && self.price_dispersion.is_finite()) {
            return Err(invalid("price dispersion must be non-negative"));
        }
        if self.fundamental <= 0 || self.reference_price <= 0 {
            return Err(invalid("prices must be positive"));
        }
        if let Some(c) = self.cutoff_s {
            if !(c >= 0.0 && c <= self.duration_s) {
                return Err(invalid("cutoff must lie within the session"));
            }
        }
        self.quotes.validate()
    }

    pub fn auction_time_ms(&self) -> TimeMs {
        (self.duration_s * 1000.0).round() as TimeMs
    }

    pub fn restricted_from_ms(&self) -> Option<TimeMs> {
        self.cutoff_s
            .map(|c| self.auction_time_ms() - (c * 1000.0).round() as TimeMs)
    }

    fn cancel_prob_at(&self, t_ms: TimeMs) -> f64 {
        match self.cancel_burst {
            Some(b)
                if (self.auction_time_ms() - t_ms) as f64
                    <= b.seconds_before_auction * 1000.0 =>
            {
                b.cancel_prob
            }
            _ => self.cancel_prob,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a sub-stream, e.g. `(asset, day, side)`.
pub fn sub_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

const TAPE_STREAM: u64 = 1;
const QUOTE_STREAM: u64 = 2;

/// Event times in ms from a Poisson process with rate
/// `base_rate * profile(t / T)`, by thinning. Times are strictly increasing
/// and lie in `[0, T)`.
pub fn event_times<R: Rng>(params: &FlowParams, rng: &mut R) -> Vec<TimeMs> {
    let horizon = params.duration_s;
    let peak = params.base_rate * params.profile.max_factor();
    let gap = Exp::new(peak).expect("validated rate");
    let end = params.auction_time_ms();
    let mut times = Vec::with_capacity((peak * horizon * 1.1) as usize + 16);
    let mut t = 0.0;
    let mut last: TimeMs = -1;
    loop {
        t += gap.sample(rng);
        if t >= horizon {
            break;
        }
        let accept = params.profile.factor(t / horizon) / params.profile.max_factor();
        if rng.random::<f64>() >= accept {
            continue;
        }
        let ms = ((t * 1000.0) as TimeMs).max(last + 1);
        if ms >= end {
            break;
        }
        times.push(ms);
        last = ms;
    }
    times
}

/// Book plus its phase schedule; applies tape events in order.
#[derive(Debug, Clone)]
pub struct Session {
    book: AuctionBook,
    restricted_from: Option<TimeMs>,
}

impl Session {
    pub fn new(reference_price: Tick, restricted_from: Option<TimeMs>) -> Self {
        Session {
            book: AuctionBook::new(reference_price),
            restricted_from,
        }
    }

    pub fn book(&self) -> &AuctionBook {
        &self.book
    }

    pub fn apply(&mut self, event: &TapeEvent) -> Result<IndicativeUpdate, BookError> {
        if let Some(from) = self.restricted_from {
            if event.time_ms >= from && self.book.phase() == Phase::Open {
                self.book.set_phase(Phase::Restricted, from)?;
            }
        }
        match &event.action {
            TapeAction::Submit(order) => self.book.submit_order(order.clone()),
            TapeAction::Cancel(id) => self.book.cancel_order(*id, event.time_ms),
        }
    }

    pub fn finalize(mut self, time: TimeMs) -> Result<AuctionResult, BookError> {
        self.book.finalize_auction(time)
    }
}

/// Outcome of driving a tape through a [`Session`].
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// `(tape index, update)` for every accepted event.
    pub updates: Vec<(usize, IndicativeUpdate)>,
    /// `(tape index, reason)` for every rejected event.
    pub rejected: Vec<(usize, BookError)>,
    pub result: AuctionResult,
}

/// Replays `tape` and finalizes at `auction_time`. Rejections are recorded
/// and the replay carries on.
pub fn replay(
    tape: &[TapeEvent],
    reference_price: Tick,
    auction_time: TimeMs,
    restricted_from: Option<TimeMs>,
) -> Result<Replay, BookError> {
    let mut session = Session::new(reference_price, restricted_from);
    let mut updates = Vec::with_capacity(tape.len());
    let mut rejected = Vec::new();
    for (i, e) in tape.iter().enumerate() {
        match session.apply(e) {
            Ok(u) => updates.push((i, u)),
            Err(err @ (BookError::ImbalanceWorsening { .. } | BookError::UnknownId(_))) => {
                rejected.push((i, err))
            }
            Err(err) => return Err(err),
        }
    }
    let result = session.finalize(auction_time)?;
    Ok(Replay {
        updates,
        rejected,
        result,
    })
}

fn draw_size<R: Rng>(params: &FlowParams, t_ms: TimeMs, rng: &mut R) -> Shares {
    let raw: f64 = match params.size_dist {
        SizeDist::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
        // rand_distr's shape is the survival exponent
        SizeDist::Pareto { alpha, xmin } => Pareto::new(xmin, alpha - 1.0).expect("validated").sample(rng),
    };
    let growth = 1.0 + params.size_growth * t_ms as f64 / params.auction_time_ms() as f64;
    ((raw * growth).round() as Shares).max(1)
}

/// Generates one day of order flow. The tape is decided event by event
/// against the live book, so restricted-phase rejections are already
/// reflected in later decisions.
pub fn gen_order_tape(params: &FlowParams) -> Result<Vec<TapeEvent>, FlowError> {
    params.validate()?;
    let quotes = if params.quotes.drives_fundamental {
        gen_quotes(params)?
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, &[TAPE_STREAM]));
    let dispersion = Normal::new(0.0, params.price_dispersion).expect("validated");
    let mut session = Session::new(params.reference_price, params.restricted_from_ms());
    let mut tape = Vec::new();
    // resident non-anchor orders, by side
    let mut cancellable: [Vec<OrderId>; 2] = [Vec::new(), Vec::new()];
    let slot = |side: Side| usize::from(side == Side::Sell);
    let mut next_id = 1u64;
    let mut quote_idx = 0;

    let push = |session: &mut Session, tape: &mut Vec<TapeEvent>, e: TapeEvent| -> bool {
        let ok = session.apply(&e).is_ok();
        tape.push(e);
        ok
    };

    let mut start = 0;
    if params.anchor_size > 0 {
        for (t, side) in [(0, Side::Buy), (1, Side::Sell)] {
            let o = AuctionOrder::limit(next_id, side, params.fundamental, params.anchor_size, t);
            next_id += 1;
            push(&mut session, &mut tape, TapeEvent { time_ms: t, action: TapeAction::Submit(o) });
        }
        start = 2;
    }

    for t in event_times(params, &mut rng) {
        if t < start {
            continue;
        }
        let clearing = session.book().clearing();
        // side that works against the imbalance with probability q
        let contrarian = |rng: &mut ChaCha8Rng| -> Side {
            if clearing.imbalance == 0 {
                return if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
            }
            let heavy = if clearing.imbalance > 0 { Side::Buy } else { Side::Sell };
            if rng.random::<f64>() < params.contrarian_prob {
                heavy.opposite()
            } else {
                heavy
            }
        };
        let resident = cancellable[0].len() + cancellable[1].len();
        if resident > 0 && rng.random::<f64>() < params.cancel_prob_at(t) {
            // cancelling from the heavy side reduces the imbalance
            let mut side = contrarian(&mut rng).opposite();
            if cancellable[slot(side)].is_empty() {
                side = side.opposite();
            }
            let pool = &mut cancellable[slot(side)];
            let k = rng.random_range(0..pool.len());
            let id = pool[k];
            if push(&mut session, &mut tape, TapeEvent { time_ms: t, action: TapeAction::Cancel(id) }) {
                cancellable[slot(side)].swap_remove(k);
            }
            continue;
        }
        let side = contrarian(&mut rng);
        let size = draw_size(params, t, &mut rng);
        let order = if rng.random::<f64>() < params.market_prob {
            AuctionOrder::market(next_id, side, size, t)
        } else {
            while quote_idx + 1 < quotes.len() && quotes[quote_idx + 1].time_ms <= t {
                quote_idx += 1;
            }
            let fundamental = quotes
                .get(quote_idx)
                .map_or(params.fundamental, |q: &QuoteSnapshot| (q.bid + q.ask) / 2);
            let centre = match params.placement {
                Placement::Fundamental => fundamental,
                Placement::Indicative => clearing.price.unwrap_or(fundamental),
            };
            let offset = dispersion.sample(&mut rng).round() as Tick;
            AuctionOrder::limit(next_id, side, (centre + offset).max(1), size, t)
        };
        let id = order.id;
        next_id += 1;
        if push(&mut session, &mut tape, TapeEvent { time_ms: t, action: TapeAction::Submit(order) }) {
            cancellable[slot(side)].push(id);
        }
    }
    Ok(tape)
}

/// Keeps the last update of every `1000 / hz` ms window.
pub fn throttle(updates: &[IndicativeUpdate], hz: f64) -> Vec<IndicativeUpdate> {
    assert!(hz > 0.0, "throttle rate must be positive");
    let window = |t: TimeMs| (t as f64 * hz / 1000.0).floor() as i64;
    let mut out: Vec<IndicativeUpdate> = Vec::new();
    for u in updates {
        match out.last_mut() {
            Some(last) if window(last.time_ms) == window(u.time_ms) => *last = *u,
            _ => out.push(*u),
        }
    }
    out
}

/// One generated auction day.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySimulation {
    pub tape: Vec<TapeEvent>,
    pub replay: Replay,
    /// Disseminated feed (throttled if requested) with the auction outcome.
    pub series: DayAuctionSeries,
    pub quotes: Vec<QuoteSnapshot>,
}

/// Generates a tape, replays it and packages the disseminated series.
pub fn gen_day_series(
    params: &FlowParams,
    key: SeriesKey,
    throttle_hz: Option<f64>,
) -> Result<DaySimulation, FlowError> {
    let tape = gen_order_tape(params)?;
    let auction_time = params.auction_time_ms();
    let replay = replay(&tape, params.reference_price, auction_time, params.restricted_from_ms())?;
    let feed: Vec<IndicativeUpdate> = replay.updates.iter().map(|(_, u)| *u).collect();
    let updates = match throttle_hz {
        Some(hz) => throttle(&feed, hz),
        None => feed,
    };
    let quotes = gen_quotes(params)?;
    let series = DayAuctionSeries {
        key,
        auction_time_ms: Some(auction_time),
        reference_price: Some(params.reference_price),
        updates,
        final_price: replay.result.final_price,
        final_volume: Some(replay.result.total_matched),
        quotes: Vec::new(),
    };
    Ok(DaySimulation {
        tape,
        replay,
        series,
        quotes,
    })
}
