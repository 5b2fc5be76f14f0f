use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::book::{AuctionBook, AuctionOrder, IndicativeUpdate, OrderId, Side};
use crate::flow::synthetic::{brownian_day, ou_day, ou_quoted_day, PathSpec};
use crate::flow::{gen_volume_panel, PanelParams};
use crate::ingest::{AuctionSide, DailyVolume, DailyVolumeRecord, DayAuctionSeries, Exchange, QuoteSnapshot, SeriesKey};
use crate::{Tick, TimeMs};

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 1, 2).unwrap() + Days::new(n)
}

fn key(n: u64) -> SeriesKey {
    SeriesKey::new("T", day(n), AuctionSide::Close)
}

fn upd(t: TimeMs, price: Option<Tick>, w: u64, i: i64) -> IndicativeUpdate {
    IndicativeUpdate {
        time_ms: t,
        price,
        matched_volume: w,
        imbalance: i,
    }
}

fn series(n: u64, updates: Vec<IndicativeUpdate>, auction: TimeMs, final_price: Tick, final_volume: u64) -> DayAuctionSeries {
    DayAuctionSeries {
        key: key(n),
        auction_time_ms: Some(auction),
        reference_price: Some(final_price),
        updates,
        final_price: Some(final_price),
        final_volume: Some(final_volume),
        quotes: Vec::new(),
    }
}

// ---- events ----

#[test]
fn new_orders_follow_the_imbalance_change() {
    let a = upd(0, Some(100), 100, 0);
    let c = classify_event(&a, &upd(1, Some(100), 150, 50));
    assert_eq!((c.kind, c.sign), (EventKind::NewBuy, 1));
    let c = classify_event(&a, &upd(1, Some(100), 130, -30));
    assert_eq!((c.kind, c.sign), (EventKind::NewSell, -1));
    assert_eq!(c.improves, None);
    let c = classify_event(&upd(0, Some(100), 100, 20), &upd(1, Some(100), 130, -10));
    assert_eq!(c.improves, Some(true));
    let c = classify_event(&upd(0, Some(100), 100, -20), &upd(1, Some(100), 130, -50));
    assert_eq!(c.improves, Some(false));
}

#[test]
fn flat_changes_are_indeterminate() {
    let a = upd(0, Some(100), 100, 10);
    for b in [upd(1, Some(100), 100, 10), upd(1, Some(100), 120, 10), upd(1, Some(100), 100, 30)] {
        let c = classify_event(&a, &b);
        assert_eq!((c.kind, c.sign), (EventKind::Indeterminate, 0));
    }
    let c = classify_event(&a, &upd(1, Some(100), 90, 10));
    assert_eq!((c.kind, c.sign), (EventKind::Cancel, 0));
}

#[test]
fn removed_sell_is_classified_from_the_book() {
    let mut book = AuctionBook::new(10);
    book.submit_order(AuctionOrder::limit(1, Side::Buy, 10, 100, 0)).unwrap();
    book.submit_order(AuctionOrder::limit(2, Side::Sell, 10, 60, 1)).unwrap();
    let before = book.submit_order(AuctionOrder::limit(3, Side::Sell, 10, 40, 2)).unwrap();
    let after = book.cancel_order(OrderId(3), 3).unwrap();
    assert_eq!(after.imbalance - before.imbalance, 40);
    assert_eq!(after.matched_volume as i64 - before.matched_volume as i64, -40);
    let c = classify_event(&before, &after);
    assert_eq!((c.kind, c.sign), (EventKind::Cancel, -1));
}

#[test]
fn relocating_buy_reads_as_a_sell() {
    // A buy that lifts the clearing price onto a deep sell level lowers the
    // imbalance; the update alone cannot tell it from a new sell.
    let mut book = AuctionBook::new(10);
    book.submit_order(AuctionOrder::limit(1, Side::Buy, 10, 100, 0)).unwrap();
    book.submit_order(AuctionOrder::limit(2, Side::Sell, 10, 50, 0)).unwrap();
    let before = book.submit_order(AuctionOrder::limit(3, Side::Sell, 12, 200, 0)).unwrap();
    assert_eq!((before.price, before.matched_volume, before.imbalance), (Some(10), 50, 50));
    let after = book.submit_order(AuctionOrder::limit(4, Side::Buy, 12, 100, 1)).unwrap();
    assert_eq!((after.price, after.matched_volume, after.imbalance), (Some(12), 100, -150));
    assert_eq!(classify_event(&before, &after).kind, EventKind::NewSell);
}

proptest! {
    #[test]
    fn single_level_flow_is_classified_exactly(
        steps in prop::collection::vec((0u8..3, 1u64..500, any::<prop::sample::Index>()), 1..200)
    ) {
        let mut book = AuctionBook::new(100);
        let mut resident: Vec<(u64, Side)> = Vec::new();
        let mut prev = IndicativeUpdate::new(0, book.clearing());
        for (n, (action, size, pick)) in steps.into_iter().enumerate() {
            let id = n as u64 + 1;
            let (next, kind, sign) = if action < 2 || resident.is_empty() {
                let side = if action % 2 == 0 { Side::Buy } else { Side::Sell };
                let u = book.submit_order(AuctionOrder::limit(id, side, 100, size, id as i64)).unwrap();
                resident.push((id, side));
                let kind = if side == Side::Buy { EventKind::NewBuy } else { EventKind::NewSell };
                (u, kind, side.sign())
            } else {
                let (oid, side) = resident.swap_remove(pick.index(resident.len()));
                (book.cancel_order(OrderId(oid), id as i64).unwrap(), EventKind::Cancel, side.sign())
            };
            // an uncrossed book reports the market-order imbalance only, so
            // the rule is exact between crossed states
            let crossed = prev.price.is_some() && next.price.is_some();
            if crossed && next.imbalance != prev.imbalance && next.matched_volume != prev.matched_volume {
                let c = classify_event(&prev, &next);
                prop_assert_eq!(c.kind, kind);
                prop_assert_eq!(i64::from(c.sign), sign);
            }
            prev = next;
        }
    }
}

// ---- volume ratios ----

fn record(exchange: Exchange, v_open: u64, v_close: u64, v_total: u64) -> DailyVolumeRecord {
    DailyVolumeRecord {
        exchange,
        v_open,
        v_close,
        v_total,
        p_open: 100,
        p_close: 100,
        prev_close: 100,
    }
}

fn volume(asset: &str, date: NaiveDate, r: DailyVolumeRecord) -> DailyVolume {
    DailyVolume {
        asset: asset.to_string(),
        date,
        record: r,
    }
}

#[test]
fn ratio_is_auction_over_total() {
    let r = record(Exchange::Nyse, 0, 12, 100);
    assert_eq!(volume_ratio::<f64>(&r, AuctionSide::Close).unwrap(), 0.12);
    assert_eq!(volume_ratio::<f64>(&r, AuctionSide::Open).unwrap(), 0.0);
    assert_eq!(
        volume_ratio::<f64>(&record(Exchange::Nyse, 0, 0, 0), AuctionSide::Close),
        Err(MetricsError::ZeroTotal)
    );
}

#[test]
fn ratio_summary_small_cases() {
    let one = [volume("A", day(0), record(Exchange::Arca, 10, 10, 100))];
    let rows = ratio_summary::<f64>(&one).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].mean_log10 + 1.0).abs() < 1e-12);
    assert_eq!(rows[0].two_sd_log10, 0.0);
    assert!((rows[0].typical - 0.1).abs() < 1e-12);

    let two = [
        volume("A", day(0), record(Exchange::Arca, 1, 10, 100)),
        volume("A", day(1), record(Exchange::Arca, 10, 0, 100)),
    ];
    let rows = ratio_summary::<f64>(&two).unwrap();
    let open = &rows[0];
    assert_eq!(open.side, AuctionSide::Open);
    assert!((open.mean_log10 + 1.5).abs() < 1e-12);
    assert!((open.typical - 10f64.powf(-1.5)).abs() < 1e-12);
    // sample sd of {-2, -1}
    assert!((open.two_sd_log10 - 2.0 * 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!((rows[1].n, rows[1].excluded), (1, 1));

    let zeros = [volume("A", day(0), record(Exchange::Nasdaq, 0, 5, 100))];
    assert_eq!(
        ratio_summary::<f64>(&zeros),
        Err(MetricsError::EmptyGroup {
            exchange: Exchange::Nasdaq,
            side: AuctionSide::Open
        })
    );
}

#[test]
fn ratio_summary_recovers_the_panel_laws() {
    let params = PanelParams {
        assets: 30,
        days: 200,
        seed: 4,
        ..PanelParams::default()
    };
    let panel = gen_volume_panel(&params).unwrap();
    let rows = ratio_summary::<f64>(&panel).unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let i = Exchange::ALL.iter().position(|&e| e == row.exchange).unwrap();
        let law = match row.side {
            AuctionSide::Open => params.open[i],
            AuctionSide::Close => params.close[i],
        };
        let se = law.sd_log10 / (row.n as f64).sqrt();
        assert!(
            (row.mean_log10 - law.mean_log10).abs() < 2.0 * se,
            "{row:?} vs {law:?}"
        );
        // sd of a normal sample has standard error sd / sqrt(2(n-1))
        let sd_se = law.sd_log10 / (2.0 * (row.n as f64 - 1.0)).sqrt();
        assert!((row.two_sd_log10 / 2.0 - law.sd_log10).abs() < 3.0 * sd_se, "{row:?}");
    }
}

fn month_panel(assets: usize, rho: impl Fn(usize) -> u64) -> Vec<DailyVolume> {
    (0..assets)
        .map(|a| {
            volume(
                &format!("A{a}"),
                NaiveDate::from_ymd_opt(2017, 3, 1 + (a % 28) as u32).unwrap(),
                record(Exchange::Nyse, 0, rho(a), 1000),
            )
        })
        .collect()
}

#[test]
fn thin_months_are_dropped() {
    assert!(monthly_median_ratio::<f64>(&month_panel(99, |_| 50), 100).is_empty());
    let rows = monthly_median_ratio::<f64>(&month_panel(101, |_| 50), 100);
    let close: Vec<_> = rows.iter().filter(|r| r.side == AuctionSide::Close).collect();
    assert_eq!(close.len(), 1);
    assert_eq!((close[0].year, close[0].month, close[0].assets), (2017, 3, 101));
    assert!((close[0].median - 0.05).abs() < 1e-15);
}

proptest! {
    #[test]
    fn monthly_median_matches_sort_oracle(
        rows in prop::collection::vec((0usize..6, 0u32..3, 1u32..28, 0u64..=100, 1u64..=100), 1..150),
        min_assets in 1usize..5,
    ) {
        let panel: Vec<DailyVolume> = rows
            .iter()
            .map(|&(a, m, d, close, extra)| volume(
                &format!("A{a}"),
                NaiveDate::from_ymd_opt(2018, 1 + m, d).unwrap(),
                record(Exchange::ALL[a % 3], 0, close, close + extra),
            ))
            .collect();
        let got = monthly_median_ratio::<f64>(&panel, min_assets);
        let mut expected = 0;
        for ex in Exchange::ALL {
            for m in 1..=3u32 {
                let members: Vec<&DailyVolume> = panel
                    .iter()
                    .filter(|v| v.record.exchange == ex && v.date.format("%m").to_string() == format!("{m:02}"))
                    .collect();
                let assets: std::collections::HashSet<&str> = members.iter().map(|v| v.asset.as_str()).collect();
                if members.is_empty() || assets.len() < min_assets {
                    continue;
                }
                let mut rho: Vec<f64> = members
                    .iter()
                    .map(|v| v.record.v_close as f64 / v.record.v_total as f64)
                    .collect();
                rho.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let n = rho.len();
                let med = if n % 2 == 1 { rho[n / 2] } else { (rho[n / 2 - 1] + rho[n / 2]) / 2.0 };
                let row = got
                    .iter()
                    .find(|r| r.exchange == ex && r.side == AuctionSide::Close && r.month == m)
                    .expect("month present");
                prop_assert!((row.median - med).abs() < 1e-15);
                expected += 1;
            }
        }
        prop_assert_eq!(got.iter().filter(|r| r.side == AuctionSide::Close).count(), expected);
    }
}

// ---- activity and matched fraction ----

const MIN: TimeMs = 60_000;

#[test]
fn activity_of_a_last_minute_burst() {
    let ups = (0..20).map(|k| upd(9 * MIN + 500 + 1000 * k, Some(100), 1, 0)).collect();
    let c = activity_curve::<f64>([&series(0, ups, 10 * MIN, 100, 1)], MIN);
    assert_eq!(c.mean.len(), 10);
    assert!(c.mean[..9].iter().all(|&v| v == 0.0));
    assert_eq!(c.mean[9], 1.0);
}

#[test]
fn activity_of_a_single_update_is_a_step() {
    let s = series(0, vec![upd(3 * MIN + 5, Some(100), 1, 0)], 6 * MIN, 100, 1);
    let c = activity_curve::<f64>([&s], MIN);
    assert_eq!(c.mean, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
}

#[test]
fn uniform_activity_is_a_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t_end = 10 * MIN;
    let mut times: Vec<TimeMs> = (0..10_000).map(|_| rng.random_range(0..t_end)).collect();
    times.sort();
    let ups = times.iter().map(|&t| upd(t, Some(100), 1, 0)).collect();
    let c = activity_curve::<f64>([&series(0, ups, t_end, 100, 1)], MIN);
    for (k, v) in c.mean.iter().enumerate() {
        let expected = (k + 1) as f64 / 10.0;
        assert!((v - expected).abs() < 0.02, "minute {k}: {v}");
    }
}

#[test]
fn short_days_count_as_finished() {
    let short = series(0, vec![upd(0, Some(100), 1, 0)], 2 * MIN, 100, 1);
    let long = series(1, vec![upd(3 * MIN + 1, Some(100), 1, 0)], 4 * MIN, 100, 1);
    let c = activity_curve::<f64>([&short, &long], MIN);
    assert_eq!(c.mean, vec![0.5, 0.5, 0.5, 1.0]);
}

#[test]
fn constant_matched_volume_gives_ones() {
    let ups = (0..10).map(|k| upd(k * MIN, Some(100), 500, 0)).collect();
    let c = matched_fraction_curve::<f64>([&series(0, ups, 10 * MIN, 100, 500)], MIN).unwrap();
    assert!(c.mean.iter().chain(&c.median).all(|&v| v == 1.0));
}

#[test]
fn linear_ramp_matches_elapsed_time() {
    let t_end = 10 * MIN;
    let ups = (0..=600).map(|k| upd(k * 1000, Some(100), k as u64 * 10, 0)).take(600).collect();
    let c = matched_fraction_curve::<f64>([&series(0, ups, t_end, 100, 6000)], MIN).unwrap();
    for (k, v) in c.mean.iter().enumerate() {
        let t = (k + 1) as f64 / 10.0;
        assert!((v - t).abs() < 2e-3, "{k}: {v}");
    }
}

#[test]
fn cancelled_peak_lifts_the_mean_only() {
    // one day in three peaks at 1.5 V around minute 5 before cancellations
    let days: Vec<DayAuctionSeries> = (0..3)
        .map(|d| {
            let ups = (0..10)
                .map(|k| {
                    let w = if d == 0 && (4..7).contains(&k) { 150 } else { 10 * (k as u64 + 1) };
                    upd(k * MIN + 10, Some(100), w, 0)
                })
                .collect();
            series(d, ups, 10 * MIN, 100, 100)
        })
        .collect();
    let c = matched_fraction_curve::<f64>(&days, MIN).unwrap();
    assert!(c.median.iter().all(|&m| m <= 1.0));
    assert!(c.mean[5] > 1.0 / 1.5 && c.mean[5] > c.median[5]);
    assert_eq!(c.mean[9], 1.0);
}

#[test]
fn matched_fraction_needs_a_final_volume() {
    let mut s = series(0, vec![upd(0, Some(100), 1, 0)], MIN, 100, 0);
    assert!(matches!(
        matched_fraction_curve::<f64>([&s], MIN),
        Err(MetricsError::MissingFinalVolume(_))
    ));
    s.final_volume = None;
    assert!(matches!(half_volume_time::<f64>([&s]), Err(MetricsError::MissingFinalVolume(_))));
}

// ---- curve shape ----

#[test]
fn exact_parabolas_are_quadratic() {
    let up: Vec<f64> = (1..=30).map(|x| 0.001 * (x * x) as f64 + 0.01 * x as f64).collect();
    assert_eq!(curve_shape(&up).unwrap().shape, CurveShape::Convex);
    let down: Vec<f64> = (1..=30).map(|x| -0.001 * (x * x) as f64 + 0.05 * x as f64).collect();
    assert_eq!(curve_shape(&down).unwrap().shape, CurveShape::Concave);
}

#[test]
fn noisy_line_is_never_quadratic() {
    use rand_distr::{Distribution, Normal};
    let noise = Normal::new(0.0, 1e-4).unwrap();
    let mut quadratic = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve: Vec<f64> = (1..=600)
            .map(|x| x as f64 / 600.0 + noise.sample(&mut rng))
            .collect();
        let shape = curve_shape(&curve).unwrap().shape;
        quadratic += usize::from(matches!(shape, CurveShape::Convex | CurveShape::Concave));
    }
    assert!(quadratic <= 1, "{quadratic} of 100 lines called quadratic");
}

#[test]
fn exact_line_is_linear() {
    let line: Vec<f64> = (1..=20).map(|x| 0.05 * x as f64).collect();
    assert_eq!(curve_shape(&line).unwrap().shape, CurveShape::Linear);
    assert!(curve_shape(&line[..9]).is_err());
}

// ---- half-volume time ----

#[test]
fn half_volume_at_a_jump() {
    let s = series(0, vec![upd(0, Some(1), 10, 0), upd(35 * MIN, Some(1), 1000, 0)], 60 * MIN, 1, 1000);
    let h = half_volume_time::<f64>([&s]).unwrap();
    assert_eq!(h.median_minutes, Some(35.0));
}

fn ramp(n: u64, start: TimeMs, len_min: i64) -> DayAuctionSeries {
    let ups = (0..=len_min * 60)
        .map(|s| upd(start + s * 1000, Some(1), s as u64, 0))
        .collect();
    series(n, ups, start + len_min * MIN + 1, 1, (len_min * 60) as u64)
}

#[test]
fn half_volume_of_a_ramp_is_midway() {
    let h = half_volume_time::<f64>([&ramp(0, 0, 20)]).unwrap();
    assert_eq!(h.median_minutes, Some(10.0));
}

#[test]
fn half_volume_matches_a_scan_on_shifted_ramps() {
    let mut days: Vec<DayAuctionSeries> = (0..7).map(|d| ramp(d, d as i64 * 17_000, 10 + d as i64)).collect();
    let mut stuck = ramp(9, 0, 10);
    stuck.final_volume = Some(10_000);
    days.push(stuck);
    let h = half_volume_time::<f64>(&days).unwrap();
    let mut scan: Vec<f64> = days
        .iter()
        .filter_map(|s| {
            let v = s.final_volume.unwrap();
            s.updates
                .iter()
                .find(|u| u.matched_volume as f64 >= 0.5 * v as f64)
                .map(|u| u.time_ms as f64 / 60_000.0)
        })
        .collect();
    scan.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(h.days_used, 7);
    assert_eq!(h.days_unreached, 1);
    assert_eq!(h.median_minutes, Some(scan[3]));
}

// ---- price dispersion ----

fn alternating(n: u64, a: Tick, b: Tick, len: usize) -> DayAuctionSeries {
    let ups = (0..len)
        .map(|k| upd(k as i64 * 1000, Some(if k % 2 == 0 { a } else { b }), k as u64, 1))
        .collect();
    series(n, ups, len as i64 * 1000, a, len as u64)
}

#[test]
fn one_return_away_gives_unit_dispersion() {
    // 61 updates: 60 returns of ±r with zero mean; the last price is b
    let s = alternating(0, 1000, 1100, 61);
    let s = DayAuctionSeries {
        final_price: Some(1100),
        ..s
    };
    let d = hurst_day::<f64>(&s, 1000, 50).unwrap();
    // slice k holds update 61 - k
    assert!((d[1].unwrap() - 1.0).abs() < 1e-12, "{d:?}");
    assert_eq!(d[2], Some(0.0));
    assert_eq!(d[0], None);
}

#[test]
fn degenerate_days_are_skipped_and_counted() {
    let flat = series(0, (0..60).map(|k| upd(k * 1000, Some(100), 1, 1)).collect(), 60_000, 100, 1);
    let short = alternating(1, 100, 101, 49);
    let mut unfinished = alternating(2, 100, 101, 60);
    unfinished.final_price = None;
    assert!(matches!(hurst_day::<f64>(&flat, MIN, 50), Err(MetricsError::ZeroVariance(_))));
    let p = hurst_dispersion::<f64>([&flat, &short, &unfinished, &alternating(3, 100, 101, 60)], MIN, 50);
    assert_eq!(
        (p.days_used, p.skipped_zero_variance, p.skipped_short, p.skipped_incomplete),
        (1, 1, 1, 1)
    );
    // geometric centres of [0, 1] and [1, 2]: 1/e and 4/e
    let e = std::f64::consts::E;
    assert_eq!(p.tau_minutes.len(), 2);
    assert!((p.tau_minutes[0] - 1.0 / e).abs() < 1e-15 && (p.tau_minutes[1] - 4.0 / e).abs() < 1e-15);
}

#[test]
fn brownian_days_diffuse() {
    let spec = PathSpec::default();
    let days: Vec<DayAuctionSeries> = (0..1000).map(|d| brownian_day(key(d), &spec, 1e-3, d)).collect();
    let p = hurst_dispersion::<f64>(&days, MIN, 50);
    assert_eq!(p.days_used, 1000);
    let fit = hurst_fit(&p.tau_minutes, &p.median).unwrap();
    assert!((fit.fit.hurst - 0.5).abs() < 0.05, "{fit:?}");
    // the slope p-value tests against a flat profile, so the label only
    // follows the side of 1/2 the estimate lands on
    assert_eq!(fit.sub_diffusive, fit.fit.hurst < 0.5);
}

/// Thirty-minute sessions with one update per second.
fn ou_spec() -> PathSpec {
    PathSpec {
        updates: 1800,
        duration_ms: 30 * MIN,
        level: 1_000_000,
    }
}

/// Relaxation time of about five and a half minutes at one update per second.
const OU_THETA: f64 = 0.003;

#[test]
fn mean_reverting_days_are_sub_diffusive() {
    let spec = ou_spec();
    let mut hits = 0;
    for seed in 0..100u64 {
        let days: Vec<DayAuctionSeries> = (0..100)
            .map(|d| ou_day(key(d), &spec, OU_THETA, 1e-3, seed * 1000 + d))
            .collect();
        let p = hurst_dispersion::<f64>(&days, MIN, 50);
        let fit = hurst_fit(&p.tau_minutes, &p.median).unwrap();
        hits += usize::from(fit.sub_diffusive && fit.fit.hurst < 0.4);
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn hurst_fit_classifies_at_the_boundary() {
    let taus: Vec<f64> = (0..8).map(|k| k as f64 + 0.5).collect();
    let sub: Vec<Option<f64>> = taus.iter().map(|t| Some(t.powf(0.9))).collect();
    let fit = hurst_fit(&taus, &sub).unwrap();
    assert!((fit.fit.hurst - 0.45).abs() < 1e-9 && fit.sub_diffusive);
    let diffusive: Vec<Option<f64>> = taus.iter().map(|&t| Some(t)).collect();
    assert!(!hurst_fit(&taus, &diffusive).unwrap().sub_diffusive);
    let mut holes = sub.clone();
    holes[2] = Some(0.0);
    holes[3] = None;
    assert_eq!(hurst_fit(&taus, &holes).unwrap().dropped, 2);
}

proptest! {
    #[test]
    fn dispersion_ignores_the_price_level(seed in 0u64..1000, factor in 2i64..50) {
        let s = brownian_day(key(0), &PathSpec { updates: 200, ..PathSpec::default() }, 1e-3, seed);
        let mut scaled = s.clone();
        for u in &mut scaled.updates {
            u.price = u.price.map(|p| p * factor);
        }
        scaled.final_price = s.final_price.map(|p| p * factor);
        let a = hurst_day::<f64>(&s, MIN, 50).unwrap();
        let b = hurst_day::<f64>(&scaled, MIN, 50).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.unwrap(), y.unwrap());
            prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
    }
}

// ---- imbalance reduction ----

fn imbalance_path(n: u64, imbalances: &[i64]) -> DayAuctionSeries {
    let ups = imbalances
        .iter()
        .enumerate()
        .map(|(k, &i)| upd(k as i64 * 1000, Some(100), k as u64, i))
        .collect();
    series(n, ups, imbalances.len() as i64 * 1000, 100, 1)
}

#[test]
fn alternating_imbalance_always_reduces() {
    let path: Vec<i64> = (0..100).map(|k| if k % 2 == 0 { 30 } else { -30 }).collect();
    let p = imbalance_reduction_prob::<f64>([&imbalance_path(0, &path)], MIN, ReductionForm::Standard);
    assert_eq!(p.overall, Some(1.0));
    assert_eq!(p.slices[0].count + p.slices[1].count, 99);
}

#[test]
fn growing_imbalance_never_reduces() {
    let path: Vec<i64> = (1..100).collect();
    let p = imbalance_reduction_prob::<f64>([&imbalance_path(0, &path)], MIN, ReductionForm::Standard);
    assert_eq!(p.overall, Some(0.0));
}

#[test]
fn zero_factors_are_skipped() {
    // transitions: 0→5 (I_t=0), 5→5 (δI=0), 5→-5 (crossing, improving), -5→-7 (worsening)
    let p = imbalance_reduction_prob::<f64>([&imbalance_path(0, &[0, 5, 5, -5, -7])], MIN, ReductionForm::Standard);
    assert_eq!(p.slices[0], Proportion { hits: 1, count: 2 });
    let lit = imbalance_reduction_prob::<f64>([&imbalance_path(0, &[0, 5, 5, -5, -7])], MIN, ReductionForm::Literal);
    // pairs (I_{t+1}, δI_t): (5, 5), (-5, 0), (-7, -10)
    assert_eq!(lit.slices[0], Proportion { hits: 0, count: 2 });
}

#[test]
fn overall_averages_daily_values() {
    let a = imbalance_path(0, &[10, -10, 10]);
    let b = imbalance_path(1, &[1, 2, 3, 4, 5]);
    let p = imbalance_reduction_prob::<f64>([&a, &b], MIN, ReductionForm::Standard);
    assert_eq!(p.overall, Some(0.5));
    assert_eq!(p.slices[0], Proportion { hits: 2, count: 6 });
}

proptest! {
    #[test]
    fn reduction_ignores_the_imbalance_scale(
        path in prop::collection::vec(-50i64..50, 2..200),
        scale in 1i64..1000,
    ) {
        let scaled: Vec<i64> = path.iter().map(|i| i * scale).collect();
        for form in [ReductionForm::Standard, ReductionForm::Literal] {
            let a = imbalance_reduction_prob::<f64>([&imbalance_path(0, &path)], 7000, form);
            let b = imbalance_reduction_prob::<f64>([&imbalance_path(0, &scaled)], 7000, form);
            prop_assert_eq!(a, b);
        }
    }
}

// ---- response ----

/// Every transition is a new order of the given sign with constant
/// indicative price `pi` and final price `px`.
fn one_sided_flow(n: u64, sign: i64, pi: Tick, px: Tick) -> DayAuctionSeries {
    let ups = (0..600)
        .map(|k| upd(k * 1000, Some(pi), k as u64 * 10, sign * 7 * k))
        .collect();
    series(n, ups, 600_000, px, 6000)
}

#[test]
fn constant_impact_is_recovered_in_every_bin() {
    let (pi, px) = (100_000, 101_005);
    let injected = (px as f64).ln() - (pi as f64).ln();
    for sign in [1, -1] {
        let px = if sign == 1 { px } else { 2 * pi - px };
        let days: Vec<DayAuctionSeries> = (0..3).map(|d| one_sided_flow(d, sign, pi, px)).collect();
        let curves = response_curves::<f64>(&days, MIN);
        assert_eq!(curves.len(), 6);
        let new_orders = &curves[0];
        assert_eq!((new_orders.side, new_orders.condition), (ResponseSide::NewOrder, Condition::Unconditional));
        assert_eq!(new_orders.bins.len(), 10);
        for bin in &new_orders.bins {
            let want = if sign == 1 { injected } else { (pi as f64).ln() - (px as f64).ln() };
            assert!((bin.median.unwrap() - want).abs() < 1e-15, "{bin:?}");
            assert!(bin.dispersion.abs() < 1e-12 && !bin.low_support);
        }
        // growing |I|: every event worsens
        assert!(curves[1].bins.iter().all(|b| b.count == 0));
        assert_eq!(curves[2].bins.iter().map(|b| b.count).sum::<usize>(), 3 * 598);
        assert!(curves[3].bins.iter().all(|b| b.count == 0));
    }
}

const DIVISORS: [Tick; 12] = [40, 45, 48, 55, 56, 60, 63, 65, 66, 70, 72, 77];
const K: Tick = 720_720;

proptest! {
    #[test]
    fn mirrored_flow_has_the_same_medians(
        steps in prop::collection::vec((0usize..12, -3i64..=3, -3i64..=3), 2..120),
        final_idx in 0usize..12,
    ) {
        let mut w = 1000i64;
        let mut i = 0i64;
        let mut ups = Vec::new();
        let mut mirror = Vec::new();
        for (k, &(p, dw, di)) in steps.iter().enumerate() {
            w = (w + dw * 10).max(0);
            i += di * 10;
            let t = k as i64 * 5000;
            ups.push(upd(t, Some(DIVISORS[p]), w as u64, i));
            mirror.push(upd(t, Some(K / DIVISORS[p]), w as u64, -i));
        }
        let px = DIVISORS[final_idx];
        let a = response_curves::<f64>([&series(0, ups, 1_000_000, px, 1)], MIN);
        let b = response_curves::<f64>([&series(0, mirror, 1_000_000, K / px, 1)], MIN);
        for (ca, cb) in a.iter().zip(&b) {
            for (x, y) in ca.bins.iter().zip(&cb.bins) {
                prop_assert_eq!(x.count, y.count);
                match (x.median, y.median) {
                    (Some(u), Some(v)) => prop_assert!((u - v).abs() < 1e-12),
                    (u, v) => prop_assert_eq!(u, v),
                }
            }
        }
    }
}

#[test]
fn response_uses_the_price_before_the_event() {
    // 3 updates: buy at t=0→1, then a cancel of a buy at 1→2
    let ups = vec![
        upd(0, Some(100), 100, 10),
        upd(70_000, Some(110), 150, 60),
        upd(80_000, Some(105), 120, 30),
    ];
    let s = series(0, ups, 120_000, 121, 120);
    let curves = response_curves::<f64>([&s], MIN);
    let new_orders = &curves[0];
    assert_eq!(new_orders.bins[0].count, 1);
    assert!((new_orders.bins[0].median.unwrap() - (121f64 / 100.0).ln()).abs() < 1e-15);
    let cancels = &curves[3];
    assert_eq!(cancels.bins[0].count, 0);
    assert_eq!(cancels.bins[1].count, 1);
    assert!((cancels.bins[1].median.unwrap() - (121f64 / 110.0).ln()).abs() < 1e-15);
    // cancelling a buy while I > 0 improves
    assert_eq!(curves[4].bins[1].count, 1);
    assert_eq!(curves[5].bins[1].count, 0);
}

// ---- spread ----

fn quoted(n: u64, prices: &[Tick], quote: QuoteSnapshot) -> DayAuctionSeries {
    let mut s = series(
        n,
        prices
            .iter()
            .enumerate()
            .map(|(k, &p)| upd(k as i64 * 1000, Some(p), k as u64, 1))
            .collect(),
        prices.len() as i64 * 1000,
        prices[prices.len() - 1],
        1,
    );
    s.quotes = vec![Some(quote); prices.len()];
    s
}

fn quote(bid: Tick, ask: Tick, bid_size: u64, ask_size: u64) -> QuoteSnapshot {
    QuoteSnapshot {
        time_ms: 0,
        bid,
        ask,
        bid_size,
        ask_size,
    }
}

#[test]
fn price_on_the_mid() {
    let s = quoted(0, &[100; 150], quote(99, 101, 30, 70));
    let t = spread_metrics::<f64>([&s], MIN).unwrap();
    assert_eq!(t.overall.time_in_spread(), Some(1.0));
    assert!(t.delta_m.iter().all(|&d| d == 0.0));
    assert_eq!(t.overall.reversion.count, 0);
    assert_eq!(t.overall.overshoot.count, 0);
    assert_eq!(t.slices.len(), 3);
    assert_eq!(t.overall.delta_s_mean, None);
}

#[test]
fn equal_sizes_make_every_comparison_a_tie() {
    let prices: Vec<Tick> = (0..200).map(|k| 90 + (k * 7) % 23).collect();
    let s = quoted(0, &prices, quote(99, 103, 40, 40));
    let t = spread_metrics::<f64>([&s], MIN).unwrap();
    assert_eq!(t.overall.weighted_mid_ties, 200);
    assert_eq!(t.overall.weighted_mid.hits, 0);
}

#[test]
fn spread_distances_by_hand() {
    // bid 98 ask 102: m = 100, s = 4
    let s = quoted(0, &[100, 106, 103, 96, 101], quote(98, 102, 10, 30));
    let t = spread_metrics::<f64>([&s], MIN).unwrap();
    let o = &t.overall;
    assert_eq!((o.in_spread, o.above, o.below), (2, 2, 1));
    // outside: 106 → 6/4, 103 → 3/4, 96 → 4/4
    assert!((o.delta_s_mean.unwrap() - (1.5 + 0.75 + 1.0) / 3.0).abs() < 1e-15);
    assert_eq!(o.delta_s_median, Some(1.0));
    // pairs with π≠m and a move: 106→103 (back), 103→96 (back), 96→101 (back)
    assert_eq!(o.reversion, Proportion { hits: 3, count: 3 });
    // from outside: 106→103 same side, 103→96 flips, 96→101 flips
    assert_eq!(o.overshoot, Proportion { hits: 2, count: 3 });
    // m_w = (30·102 + 10·98)/40 = 101
    // 100: |0| vs |1| no; 106: 6 vs 5 yes; 103: 3 vs 2 yes; 96: 4 vs 5 no; 101: 1 vs 0 yes
    assert_eq!(o.weighted_mid, Proportion { hits: 3, count: 5 });
    assert_eq!(t.delta_m_ccdf()[0], (0.0, 1.0));
    assert!((t.delta_m_ccdf().last().unwrap().1 - 0.2).abs() < 1e-15);
}

#[test]
fn mean_reverting_price_reverts() {
    let spec = PathSpec {
        updates: 10_000,
        duration_ms: 10_000_000,
        level: 100_000,
    };
    let mut above_half = 0;
    for seed in 0..100 {
        let s = ou_quoted_day(key(0), &spec, 2, 0.05, 3.0, seed);
        let t = spread_metrics::<f64>([&s], MIN).unwrap();
        above_half += usize::from(t.overall.reversion.value::<f64>().unwrap() > 0.5);
    }
    assert!(above_half >= 95, "{above_half}/100");
}

#[test]
fn random_walk_far_outside_rarely_overshoots() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut p: Tick = 10_200;
    let prices: Vec<Tick> = (0..5000)
        .map(|_| {
            p += rng.random_range(-2..=2);
            p
        })
        .collect();
    let s = quoted(0, &prices, quote(9_999, 10_001, 5, 5));
    let t = spread_metrics::<f64>([&s], MIN).unwrap();
    let o = t.overall.overshoot.value::<f64>().unwrap();
    assert!(o < 0.05, "{o}");
}

#[test]
fn spread_metrics_need_quotes() {
    let s = series(0, vec![upd(0, Some(1), 1, 1)], 1000, 1, 1);
    assert_eq!(spread_metrics::<f64>([&s], MIN), Err(MetricsError::NoQuotes));
}

proptest! {
    #[test]
    fn spread_positions_partition_every_slice(
        rows in prop::collection::vec((prop::option::of(90i64..110), 95i64..100, 1i64..6, prop::bool::ANY), 1..200),
    ) {
        let mut s = series(0, Vec::new(), 1_000_000, 100, 1);
        for (k, &(price, bid, width, has_quote)) in rows.iter().enumerate() {
            s.updates.push(upd(k as i64 * 2500, price, 1, 1));
            s.quotes.push(has_quote.then(|| quote(bid, bid + width, 3, 4)));
        }
        let t = spread_metrics::<f64>([&s], MIN).unwrap();
        for row in t.slices.iter().chain([&t.overall]) {
            prop_assert_eq!(row.in_spread + row.above + row.below, row.updates);
            if row.updates > 0 {
                let sum = row.time_in_spread().unwrap() + row.time_above().unwrap() + row.time_below().unwrap();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        let valid = rows.iter().filter(|r| r.0.is_some() && r.3).count();
        prop_assert_eq!(t.overall.updates, valid);
    }
}

// ---- generated flows ----

#[test]
fn estimators_are_pure() {
    use crate::flow::{gen_day_series, FlowParams};
    let days: Vec<DayAuctionSeries> = (0..3)
        .map(|d| {
            let params = FlowParams {
                seed: d,
                duration_s: 300.0,
                ..FlowParams::default()
            };
            let sim = gen_day_series(&params, key(d), None).unwrap();
            crate::ingest::align_quotes(sim.series, &sim.quotes)
        })
        .collect();
    let run = || {
        (
            activity_curve::<f64>(&days, MIN),
            matched_fraction_curve::<f64>(&days, MIN).unwrap(),
            hurst_dispersion::<f64>(&days, MIN, 50),
            imbalance_reduction_prob::<f64>(&days, MIN, ReductionForm::Standard),
            response_curves::<f64>(&days, MIN),
            spread_metrics::<f64>(&days, MIN).unwrap(),
        )
    };
    assert_eq!(run(), run());
}

