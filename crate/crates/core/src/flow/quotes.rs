use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{invalid, sub_seed, FlowError, FlowParams, QUOTE_STREAM};
use crate::ingest::QuoteSnapshot;
use crate::{Tick, TimeMs};

/// Regular-book quotes around a fundamental that follows an integer random
/// walk. Steps are Gaussian draws rounded to whole ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuoteParams {
    pub interval_ms: TimeMs,
    /// Standard deviation of one walk step, in ticks.
    pub step_sd: f64,
    pub half_spread: Tick,
    pub size_mu: f64,
    pub size_sigma: f64,
    /// Ask size copies the bid size.
    pub equal_sizes: bool,
    /// Limit orders are priced around the current quote mid instead of the
    /// fixed fundamental.
    pub drives_fundamental: bool,
}

impl Default for QuoteParams {
    fn default() -> Self {
        QuoteParams {
            interval_ms: 1_000,
            step_sd: 0.5,
            half_spread: 1,
            size_mu: 500f64.ln(),
            size_sigma: 0.8,
            equal_sizes: false,
            drives_fundamental: false,
        }
    }
}

impl QuoteParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.interval_ms <= 0 {
            return Err(invalid("quote interval must be positive"));
        }
        if !(self.step_sd >= 0.0 && self.step_sd.is_finite()) {
            return Err(invalid("quote step sd must be non-negative"));
        }
        if self.half_spread < 1 {
            return Err(invalid("half spread must be at least one tick"));
        }
        if !(self.size_mu.is_finite() && self.size_sigma > 0.0 && self.size_sigma.is_finite()) {
            return Err(invalid("quote sizes need finite mu and sigma > 0"));
        }
        Ok(())
    }
}

/// Quotes on a regular grid over `[0, T)`, starting from the fundamental.
pub fn gen_quotes(params: &FlowParams) -> Result<Vec<QuoteSnapshot>, FlowError> {
    params.validate()?;
    let q = &params.quotes;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, &[QUOTE_STREAM]));
    let step = Normal::new(0.0, q.step_sd).expect("validated");
    let size = LogNormal::new(q.size_mu, q.size_sigma).expect("validated");
    let end = params.auction_time_ms();
    let mut centre = params.fundamental;
    let mut out = Vec::with_capacity((end / q.interval_ms + 1) as usize);
    let mut t = 0;
    while t < end {
        if t > 0 {
            centre += step.sample(&mut rng).round() as Tick;
        }
        // keep the bid above zero
        centre = centre.max(q.half_spread + 1);
        let bid_size = (size.sample(&mut rng).round() as u64).max(1);
        let ask_size = if q.equal_sizes {
            bid_size
        } else {
            (size.sample(&mut rng).round() as u64).max(1)
        };
        out.push(QuoteSnapshot {
            time_ms: t,
            bid: centre - q.half_spread,
            ask: centre + q.half_spread,
            bid_size,
            ask_size,
        });
        t += q.interval_ms;
    }
    Ok(out)
}
