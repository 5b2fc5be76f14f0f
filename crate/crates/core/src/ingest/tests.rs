use chrono::NaiveDate;
use proptest::prelude::*;

use super::*;
use crate::book::IndicativeUpdate;

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 3, 14).unwrap()
}

fn update(t: TimeMs, price: Option<i64>, w: u64, i: i64) -> IndicativeUpdate {
    IndicativeUpdate {
        time_ms: t,
        price,
        matched_volume: w,
        imbalance: i,
    }
}

const FEED: &str = "\
asset,date,side,time_ms,indicative_price_ticks,matched_volume,imbalance
SPY,2016-03-14,close,1000,,0,100
SPY,2016-03-14,close,2000,20010,300,-50
SPY,2016-03-14,close,2500,20012,400,0
";

#[test]
fn empty_feed_is_empty() {
    assert!(parse_feed("".as_bytes()).unwrap().is_empty());
    let header_only = FEED.lines().next().unwrap();
    assert!(parse_feed(header_only.as_bytes()).unwrap().is_empty());
}

#[test]
fn three_rows_make_one_series() {
    let series = parse_feed(FEED.as_bytes()).unwrap();
    assert_eq!(series.len(), 1);
    let s = &series[0];
    assert_eq!(s.key, SeriesKey::new("SPY", day(), AuctionSide::Close));
    assert_eq!(
        s.updates,
        vec![
            update(1000, None, 0, 100),
            update(2000, Some(20010), 300, -50),
            update(2500, Some(20012), 400, 0),
        ]
    );
}

#[test]
fn permuted_rows_name_the_offending_line() {
    let mut lines: Vec<&str> = FEED.lines().collect();
    lines.swap(2, 3);
    let shuffled = lines.join("\n");
    match parse_feed(shuffled.as_bytes()) {
        Err(IngestError::NonMonotoneTime { line, time_ms, .. }) => {
            assert_eq!(line, 4);
            assert_eq!(time_ms, 2000);
        }
        other => panic!("expected NonMonotoneTime, got {other:?}"),
    }
}

#[test]
fn malformed_rows_carry_line_numbers() {
    let bad = FEED.replace("20012,400", "20012,lots");
    match parse_feed(bad.as_bytes()) {
        Err(IngestError::Schema { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a schema error, got {other:?}"),
    }
    let header = FEED.replace("imbalance", "imb");
    assert!(matches!(
        parse_feed(header.as_bytes()),
        Err(IngestError::Schema { line: 1, .. })
    ));
}

#[test]
fn volumes_over_total_are_rejected() {
    let csv = "\
asset,date,exchange,v_open,v_close,v_total,p_open,p_close,prev_close
AAA,2016-03-14,NYSE,10,12,100,500,505,499
BBB,2016-03-14,ARCA,60,50,100,500,505,499
";
    match parse_volumes(csv.as_bytes()) {
        Err(IngestError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn tape_rows_parse_into_events() {
    let csv = "\
asset,date,side,time_ms,action,order_id,buy_sell,kind,price_ticks,size
X,2016-03-14,open,0,submit,1,buy,limit,1000,100
X,2016-03-14,open,1,submit,2,sell,market,,50
X,2016-03-14,open,5,cancel,1,,,,
";
    let tapes = parse_tape(csv.as_bytes()).unwrap();
    assert_eq!(tapes.len(), 1);
    let events = &tapes[0].1;
    assert_eq!(events.len(), 3);
    assert_eq!(
        events[1].action,
        TapeAction::Submit(crate::book::AuctionOrder::market(2, crate::book::Side::Sell, 50, 1))
    );
    assert_eq!(events[2].action, TapeAction::Cancel(crate::book::OrderId(1)));
    let mut out = Vec::new();
    write_tape(&mut out, tapes.iter().map(|(k, e)| (k, e.as_slice()))).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), csv);

    let priced_market = csv.replace("market,,50", "market,999,50");
    assert!(matches!(
        parse_tape(priced_market.as_bytes()),
        Err(IngestError::Schema { line: 3, .. })
    ));
}

fn quote(t: TimeMs, bid: i64) -> QuoteSnapshot {
    QuoteSnapshot {
        time_ms: t,
        bid,
        ask: bid + 2,
        bid_size: 100,
        ask_size: 200,
    }
}

fn series_of(times: &[TimeMs]) -> DayAuctionSeries {
    let mut s = DayAuctionSeries::new(SeriesKey::new("X", day(), AuctionSide::Open));
    s.updates = times.iter().map(|&t| update(t, Some(100), 1, 0)).collect();
    s
}

#[test]
fn single_quote_annotates_everything() {
    let s = align_quotes(series_of(&[0, 10, 5000]), &[quote(0, 99)]);
    assert!(s.quotes.iter().all(|q| *q == Some(quote(0, 99))));
}

#[test]
fn quote_at_update_time_is_used() {
    let s = align_quotes(series_of(&[5, 10]), &[quote(3, 90), quote(10, 91), quote(11, 92)]);
    assert_eq!(s.quotes, vec![Some(quote(3, 90)), Some(quote(10, 91))]);
    let early = align_quotes(series_of(&[1, 3]), &[quote(3, 90)]);
    assert_eq!(early.quotes, vec![None, Some(quote(3, 90))]);
}

#[test]
fn slice_boundaries() {
    let mut s = series_of(&[0, 59_999, 60_000, 500_000]);
    s.auction_time_ms = Some(600_000);
    let fwd = slice_minutes(&s, SliceDirection::Forward).unwrap();
    assert_eq!(fwd[0], 0..2);
    assert_eq!(fwd[1], 2..3);
    assert_eq!(fwd[8], 3..4);

    let mut s = series_of(&[600_000 - 90_000]);
    s.auction_time_ms = Some(600_000);
    let back = slice_minutes(&s, SliceDirection::Backward).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[1], 0..1);

    s.auction_time_ms = None;
    assert!(slice_minutes(&s, SliceDirection::Backward).is_none());
}

fn times_strategy() -> impl Strategy<Value = Vec<TimeMs>> {
    prop::collection::btree_set(0i64..2_000_000, 1..120).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #[test]
    fn alignment_matches_linear_scan(
        times in times_strategy(),
        qtimes in times_strategy(),
    ) {
        let quotes: Vec<QuoteSnapshot> = qtimes.iter().enumerate().map(|(i, &t)| quote(t, i as i64)).collect();
        let s = align_quotes(series_of(&times), &quotes);
        for (u, got) in s.updates.iter().zip(&s.quotes) {
            let oracle = quotes.iter().filter(|q| q.time_ms <= u.time_ms).last().copied();
            prop_assert_eq!(*got, oracle);
        }
    }

    #[test]
    fn slicing_is_a_partition(
        times in times_strategy(),
        width in 1i64..200_000,
        backward in any::<bool>(),
    ) {
        let mut s = series_of(&times);
        s.auction_time_ms = Some(2_000_000);
        let dir = if backward { SliceDirection::Backward } else { SliceDirection::Forward };
        let ranges = slice_updates(&s, dir, width).unwrap();
        let mut covered = vec![0usize; times.len()];
        for (k, r) in ranges.iter().enumerate() {
            for i in r.clone() {
                covered[i] += 1;
                let t = times[i];
                let offset = if backward { 2_000_000 - t } else { t };
                prop_assert_eq!((offset / width) as usize, k);
            }
        }
        prop_assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn feed_round_trips(
        groups in prop::collection::vec(
            (0u8..4, 0u32..30, any::<bool>(), prop::collection::btree_map(
                0i64..10_000_000,
                (prop::option::of(1i64..1_000_000), 0u64..1_000_000, -1_000_000i64..1_000_000),
                1..30,
            )),
            0..6,
        )
    ) {
        let mut seen = std::collections::HashSet::new();
        let mut input = Vec::new();
        for (asset, d, open, rows) in groups {
            let key = SeriesKey::new(
                format!("A{asset}"),
                day() + chrono::Days::new(d as u64),
                if open { AuctionSide::Open } else { AuctionSide::Close },
            );
            if !seen.insert(key.clone()) {
                continue;
            }
            let mut s = DayAuctionSeries::new(key);
            s.updates = rows
                .into_iter()
                .map(|(t, (p, w, i))| update(t, p, if p.is_some() { w } else { 0 }, i))
                .collect();
            input.push(s);
        }
        let mut buf = Vec::new();
        write_feed(&mut buf, &input).unwrap();
        let parsed = parse_feed(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed, input);
    }
}
