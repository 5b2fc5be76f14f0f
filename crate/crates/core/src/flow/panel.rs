use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{invalid, sub_seed, FlowError};
use crate::ingest::{DailyVolume, DailyVolumeRecord, Exchange};

/// `log10` of an auction volume ratio is drawn from `N(mean_log10, sd_log10)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioLaw {
    pub mean_log10: f64,
    pub sd_log10: f64,
}

impl RatioLaw {
    pub const fn new(mean_log10: f64, sd_log10: f64) -> Self {
        RatioLaw {
            mean_log10,
            sd_log10,
        }
    }
}

/// Synthetic daily volume panel. Asset `i` lists on `Exchange::ALL[i % 3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelParams {
    pub assets: usize,
    pub days: usize,
    pub start: NaiveDate,
    /// Open and close laws per exchange, in `Exchange::ALL` order.
    pub open: [RatioLaw; 3],
    pub close: [RatioLaw; 3],
    /// Daily total volume is lognormal with these parameters.
    pub total_mu: f64,
    pub total_sigma: f64,
    pub seed: u64,
}

impl Default for PanelParams {
    fn default() -> Self {
        PanelParams {
            assets: 100,
            days: 250,
            start: NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date"),
            open: [
                RatioLaw::new(-1.72, 0.62),
                RatioLaw::new(-1.51, 0.395),
                RatioLaw::new(-1.61, 0.45),
            ],
            close: [
                RatioLaw::new(-1.78, 0.735),
                RatioLaw::new(-1.15, 0.41),
                RatioLaw::new(-0.91, 0.30),
            ],
            total_mu: 2e6f64.ln(),
            total_sigma: 0.5,
            seed: 0,
        }
    }
}

/// The first `n` weekdays from `start` on.
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn asset_name(i: usize) -> String {
    format!("A{i:04}")
}

pub fn listing(i: usize) -> Exchange {
    Exchange::ALL[i % 3]
}

/// Generates `assets x days` records. A draw whose open and close ratios
/// sum above one is redrawn.
pub fn gen_volume_panel(params: &PanelParams) -> Result<Vec<DailyVolume>, FlowError> {
    for law in params.open.iter().chain(&params.close) {
        if !(law.mean_log10.is_finite() && law.sd_log10 >= 0.0 && law.sd_log10.is_finite()) {
            return Err(invalid("ratio laws need a finite mean and sd >= 0"));
        }
    }
    if !(params.total_sigma > 0.0 && params.total_mu.is_finite()) {
        return Err(invalid("total volume law needs sigma > 0"));
    }
    let days = trading_days(params.start, params.days);
    let total = LogNormal::new(params.total_mu, params.total_sigma).expect("validated");
    let walk = Normal::new(0.0, 0.01).expect("valid");
    let mut out = Vec::with_capacity(params.assets * params.days);
    for a in 0..params.assets {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, &[a as u64]));
        let ex = listing(a);
        let k = Exchange::ALL.iter().position(|e| *e == ex).expect("listed");
        let open = Normal::new(params.open[k].mean_log10, params.open[k].sd_log10).expect("validated");
        let close = Normal::new(params.close[k].mean_log10, params.close[k].sd_log10).expect("validated");
        let mut price = 10_000f64;
        for date in &days {
            let (ro, rc) = loop {
                let ro = 10f64.powf(open.sample(&mut rng));
                let rc = 10f64.powf(close.sample(&mut rng));
                if ro + rc <= 1.0 {
                    break (ro, rc);
                }
            };
            let v_total = (total.sample(&mut rng).round() as u64).max(1);
            let prev_close = price.round() as i64;
            let p_open = (price * (1.0 + walk.sample(&mut rng))).round().max(1.0);
            price = (p_open * (1.0 + walk.sample(&mut rng))).max(1.0);
            out.push(DailyVolume {
                asset: asset_name(a),
                date: *date,
                record: DailyVolumeRecord {
                    exchange: ex,
                    v_open: (ro * v_total as f64).floor() as u64,
                    v_close: (rc * v_total as f64).floor() as u64,
                    v_total,
                    p_open: p_open as i64,
                    p_close: price.round() as i64,
                    prev_close,
                },
            });
        }
    }
    Ok(out)
}
