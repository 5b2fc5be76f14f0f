use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use auctionlab::ingest::{
    attach_auctions, attach_quotes, parse_auctions, parse_feed, parse_quotes, parse_tape, parse_volumes,
    AuctionRecord, AuctionSide, DailyVolume, DayAuctionSeries, IngestError, SeriesKey, TapeEvent, AUCTIONS_FILE,
    FEED_FILE, QUOTES_FILE, TAPE_FILE, VOLUMES_FILE,
};
use auctionlab::metrics::{
    activity_curve, curve_shape, half_volume_time, hurst_dispersion, hurst_fit, imbalance_reduction_prob,
    matched_fraction_curve, monthly_median_ratio, ratio_summary, response_curves, spread_metrics, Condition,
    CurveShape, Proportion, ReductionForm, ResponseCurve, SpreadRow, SpreadTable,
};
use auctionlab::stats::{fit_tail, select_xmin_detailed, vuong_test, TailFamily, TailModel};
use auctionlab::TimeMs;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Thresholds;
use crate::diag;
use crate::error::CliError;
use crate::replay::{in_file, open, replay_auction};
use crate::simulate::write_json;
use crate::table::{write_table, Row, RowSink};

pub const ANALYSIS_MANIFEST_FILE: &str = "analysis.json";

/// Key of the rows pooling every asset of one auction side.
pub const POOLED_KEY: &str = "all";
/// Slice label of whole-session rows.
pub const OVERALL_SLICE: &str = "all";
/// Points kept from an empirical reciprocal distribution.
pub const CCDF_POINTS: usize = 100;
/// Levels at which tail-test p-values are tallied.
pub const TAIL_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Table {
    Table1Ratios,
    Fig3Monthly,
    Fig4Activity,
    Fig5Fraction,
    Fig6Hurst,
    Fig7Reduction,
    Fig8Response,
    Fig9Conditional,
    Fig10Spread,
    Fig11Ds,
    Fig12Reversion,
    Fig13Weightedmid,
    Fig1Fig2Tails,
}

impl Table {
    pub const ALL: [Table; 13] = [
        Table::Table1Ratios,
        Table::Fig3Monthly,
        Table::Fig4Activity,
        Table::Fig5Fraction,
        Table::Fig6Hurst,
        Table::Fig7Reduction,
        Table::Fig8Response,
        Table::Fig9Conditional,
        Table::Fig10Spread,
        Table::Fig11Ds,
        Table::Fig12Reversion,
        Table::Fig13Weightedmid,
        Table::Fig1Fig2Tails,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::Table1Ratios => "table1_ratios",
            Table::Fig3Monthly => "fig3_monthly",
            Table::Fig4Activity => "fig4_activity",
            Table::Fig5Fraction => "fig5_fraction",
            Table::Fig6Hurst => "fig6_hurst",
            Table::Fig7Reduction => "fig7_reduction",
            Table::Fig8Response => "fig8_response",
            Table::Fig9Conditional => "fig9_conditional",
            Table::Fig10Spread => "fig10_spread",
            Table::Fig11Ds => "fig11_ds",
            Table::Fig12Reversion => "fig12_reversion",
            Table::Fig13Weightedmid => "fig13_weightedmid",
            Table::Fig1Fig2Tails => "fig1_fig2_tails",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn from_name(name: &str) -> Option<Table> {
        Table::ALL.into_iter().find(|t| t.name() == name)
    }

    fn is_spread(self) -> bool {
        matches!(
            self,
            Table::Fig10Spread | Table::Fig11Ds | Table::Fig12Reversion | Table::Fig13Weightedmid
        )
    }

    fn needs_feed(self) -> bool {
        !matches!(self, Table::Table1Ratios | Table::Fig3Monthly | Table::Fig1Fig2Tails)
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tables requested with `--estimator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection(pub Vec<Table>);

pub fn parse_selection(s: &str) -> Result<Selection, String> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim) {
        if name == "all" {
            out.extend(Table::ALL);
            continue;
        }
        match Table::from_name(name) {
            Some(t) => out.push(t),
            None => {
                let known: Vec<&str> = Table::ALL.iter().map(|t| t.name()).collect();
                return Err(format!("unknown estimator {name}; expected all or one of {}", known.join(", ")));
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(Selection(out))
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub input: PathBuf,
    pub output: PathBuf,
    pub tables: Vec<Table>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisManifest {
    pub command: &'static str,
    pub thresholds: Thresholds,
    /// Data rows per table written.
    pub tables: BTreeMap<&'static str, usize>,
    pub series: usize,
    pub volume_records: usize,
    pub auctions_replayed: usize,
    pub warnings: usize,
}

/// Rows of every table, indexed by `Table as usize`.
#[derive(Default)]
struct Tables([Vec<Row>; 13]);

impl Tables {
    fn sink(&mut self, t: Table, key: &str, side: AuctionSide) -> RowSink<'_> {
        RowSink::new(&mut self.0[t as usize], key, side.as_str())
    }

    fn extend(&mut self, other: Tables) {
        for (mine, theirs) in self.0.iter_mut().zip(other.0) {
            mine.extend(theirs);
        }
    }
}

/// Output of one estimator job: rows plus deferred warnings, so stderr stays
/// in a fixed order whatever the thread count.
#[derive(Default)]
struct JobOut {
    tables: Tables,
    warnings: Vec<String>,
    shape: Option<CurveShape>,
    hurst: Option<(f64, bool)>,
}

#[derive(Default)]
struct Inputs {
    series: Vec<DayAuctionSeries>,
    volumes: Vec<DailyVolume>,
    auctions: HashMap<SeriesKey, AuctionRecord>,
    tapes: Vec<(SeriesKey, Vec<TapeEvent>)>,
}

struct Warnings(usize);

impl Warnings {
    fn emit(&mut self, message: &str) {
        self.0 += 1;
        diag("warn", "analyze", &[("message", message)]);
    }
}

fn parse_file<T>(
    path: &Path,
    warnings: &mut Warnings,
    errors: &mut Vec<IngestError>,
    parse: impl FnOnce(std::io::BufReader<std::fs::File>) -> Result<T, IngestError>,
) -> Option<T> {
    if !path.is_file() {
        warnings.emit(&format!("{} not found", path.display()));
        return None;
    }
    let result = open(path).and_then(|r| parse(r).map_err(|e| in_file(path, e)));
    match result {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(e);
            None
        }
    }
}

/// Parses every file the selected tables need. Schema errors of all files
/// are collected before giving up.
fn load(dir: &Path, tables: &[Table], warnings: &mut Warnings) -> Result<Inputs, CliError> {
    if !dir.is_dir() {
        return Err(CliError::input(format!("input directory {} does not exist", dir.display())));
    }
    let feed = tables.iter().any(|t| t.needs_feed());
    let quotes = tables.iter().any(|t| t.is_spread());
    let volumes = tables.iter().any(|t| matches!(t, Table::Table1Ratios | Table::Fig3Monthly));
    let tape = tables.contains(&Table::Fig1Fig2Tails);

    let mut errors = Vec::new();
    let mut inputs = Inputs::default();
    if feed {
        inputs.series = parse_file(&dir.join(FEED_FILE), warnings, &mut errors, parse_feed).unwrap_or_default();
    }
    let mut records = Vec::new();
    if feed || tape {
        let path = dir.join(AUCTIONS_FILE);
        records = parse_file(&path, warnings, &mut errors, parse_auctions).unwrap_or_default();
        if feed {
            if let Err(e) = attach_auctions(&mut inputs.series, &records) {
                errors.push(in_file(&path, e));
            }
        }
    }
    if quotes {
        if let Some(q) = parse_file(&dir.join(QUOTES_FILE), warnings, &mut errors, parse_quotes) {
            inputs.series = attach_quotes(std::mem::take(&mut inputs.series), &q);
        }
    }
    if volumes {
        inputs.volumes = parse_file(&dir.join(VOLUMES_FILE), warnings, &mut errors, parse_volumes).unwrap_or_default();
    }
    if tape {
        inputs.tapes = parse_file(&dir.join(TAPE_FILE), warnings, &mut errors, parse_tape).unwrap_or_default();
    }
    if !errors.is_empty() {
        return Err(CliError::InputFiles(errors));
    }
    inputs.auctions = records.into_iter().map(|r| (r.key.clone(), r)).collect();
    Ok(inputs)
}

fn prop(p: Proportion) -> (Option<f64>, Option<usize>) {
    (p.value(), Some(p.count))
}

fn fraction_tables(out: &mut JobOut, key: &str, side: AuctionSide, days: &[&DayAuctionSeries], width: TimeMs) {
    let mut sink = out.tables.sink(Table::Fig5Fraction, key, side);
    let usable: Vec<&DayAuctionSeries> = days
        .iter()
        .copied()
        .filter(|s| s.final_volume.is_some_and(|v| v > 0))
        .collect();
    sink.push(OVERALL_SLICE, "days_without_volume", Some((days.len() - usable.len()) as f64), None);
    if usable.is_empty() {
        return;
    }
    let curve = match matched_fraction_curve::<f64>(usable.iter().copied(), width) {
        Ok(c) => c,
        Err(e) => {
            out.warnings.push(format!("{key}/{side}: matched fraction: {e}"));
            return;
        }
    };
    for (k, (mean, median)) in curve.mean.iter().zip(&curve.median).enumerate() {
        sink.push(k, "mean", Some(*mean), Some(curve.days));
        sink.push(k, "median", Some(*median), Some(curve.days));
    }
    match curve_shape(&curve.mean) {
        Ok(fit) => {
            sink.label(OVERALL_SLICE, "shape", fit.shape.as_str(), Some(curve.mean.len()));
            sink.push(OVERALL_SLICE, "shape_statistic", Some(fit.statistic), None);
            sink.push(OVERALL_SLICE, "shape_p_value", Some(fit.p_value_one_sided), None);
            sink.push(OVERALL_SLICE, "quadratic_coefficient", Some(fit.quadratic_coefficient), None);
            out.shape = Some(fit.shape);
        }
        Err(e) => out.warnings.push(format!("{key}/{side}: curve shape: {e}")),
    }
    match half_volume_time::<f64>(usable.iter().copied()) {
        Ok(h) => {
            sink.push(OVERALL_SLICE, "half_volume_minutes", h.median_minutes, Some(h.days_used));
            sink.push(OVERALL_SLICE, "days_unreached", Some(h.days_unreached as f64), None);
        }
        Err(e) => out.warnings.push(format!("{key}/{side}: half-volume time: {e}")),
    }
}

fn hurst_table(out: &mut JobOut, key: &str, side: AuctionSide, days: &[&DayAuctionSeries], th: &Thresholds) {
    let profile = hurst_dispersion::<f64>(days.iter().copied(), th.slice_ms(), th.min_updates);
    let mut sink = out.tables.sink(Table::Fig6Hurst, key, side);
    for k in 0..profile.median.len() {
        sink.push(k, "tau_minutes", Some(profile.tau_minutes[k]), None);
        sink.push(k, "d_median", profile.median[k], Some(profile.days_per_slice[k]));
    }
    sink.push(OVERALL_SLICE, "days_used", Some(profile.days_used as f64), None);
    sink.push(OVERALL_SLICE, "days_skipped_short", Some(profile.skipped_short as f64), None);
    sink.push(OVERALL_SLICE, "days_skipped_zero_variance", Some(profile.skipped_zero_variance as f64), None);
    sink.push(OVERALL_SLICE, "days_skipped_incomplete", Some(profile.skipped_incomplete as f64), None);
    if profile.days_used == 0 {
        return;
    }
    match hurst_fit(&profile.tau_minutes, &profile.median) {
        Ok(h) => {
            let n = Some(h.fit.n_used);
            sink.push(OVERALL_SLICE, "prefactor", Some(h.fit.prefactor), n);
            sink.push(OVERALL_SLICE, "hurst", Some(h.fit.hurst), n);
            sink.push(OVERALL_SLICE, "p_value", Some(h.fit.p_value), n);
            sink.push(OVERALL_SLICE, "sub_diffusive", Some(f64::from(u8::from(h.sub_diffusive))), n);
            sink.push(OVERALL_SLICE, "slices_dropped", Some(h.dropped as f64), None);
            out.hurst = Some((h.fit.hurst, h.sub_diffusive));
        }
        Err(e) => out.warnings.push(format!("{key}/{side}: hurst fit: {e}")),
    }
}

fn reduction_table(out: &mut JobOut, key: &str, side: AuctionSide, days: &[&DayAuctionSeries], width: TimeMs) {
    let profile = imbalance_reduction_prob::<f64>(days.iter().copied(), width, ReductionForm::Standard);
    let mut sink = out.tables.sink(Table::Fig7Reduction, key, side);
    for (k, p) in profile.slices.iter().enumerate() {
        let (v, n) = prop(*p);
        sink.push(k, "probability", v, n);
    }
    sink.push(OVERALL_SLICE, "overall", profile.overall, Some(profile.days));
}

fn response_rows(sink: &mut RowSink<'_>, curve: &ResponseCurve<f64>, prefix: &str) {
    for b in &curve.bins {
        sink.push(b.slice, &format!("{prefix}_median"), b.median, Some(b.count));
        sink.push(b.slice, &format!("{prefix}_dispersion"), Some(b.dispersion), Some(b.count));
        sink.push(b.slice, &format!("{prefix}_low_support"), Some(f64::from(u8::from(b.low_support))), Some(b.count));
    }
}

fn response_tables(out: &mut JobOut, key: &str, side: AuctionSide, days: &[&DayAuctionSeries], tables: &[Table], width: TimeMs) {
    let curves = response_curves::<f64>(days.iter().copied(), width);
    for c in &curves {
        let (table, prefix) = match c.condition {
            Condition::Unconditional => (Table::Fig8Response, c.side.as_str().to_string()),
            cond => (Table::Fig9Conditional, format!("{}_{}", c.side.as_str(), cond.as_str())),
        };
        if tables.contains(&table) {
            response_rows(&mut out.tables.sink(table, key, side), c, &prefix);
        }
    }
}

fn spread_rows(out: &mut JobOut, key: &str, side: AuctionSide, row: &SpreadRow<f64>, tables: &[Table]) {
    let slice = row.slice.map_or(OVERALL_SLICE.to_string(), |k| k.to_string());
    let n = Some(row.updates);
    let outside = Some(row.above + row.below);
    for &t in tables {
        let mut sink = out.tables.sink(t, key, side);
        match t {
            Table::Fig10Spread => {
                sink.push(&slice, "time_in_spread", row.time_in_spread(), n);
                sink.push(&slice, "time_above", row.time_above(), n);
                sink.push(&slice, "time_below", row.time_below(), n);
                sink.push(&slice, "delta_m_mean", row.delta_m_mean, n);
                sink.push(&slice, "delta_m_median", row.delta_m_median, n);
            }
            Table::Fig11Ds => {
                sink.push(&slice, "delta_s_mean", row.delta_s_mean, outside);
                sink.push(&slice, "delta_s_median", row.delta_s_median, outside);
            }
            Table::Fig12Reversion => {
                let (v, c) = prop(row.reversion);
                sink.push(&slice, "reversion", v, c);
                let (v, c) = prop(row.overshoot);
                sink.push(&slice, "overshoot", v, c);
            }
            Table::Fig13Weightedmid => {
                let (v, c) = prop(row.weighted_mid);
                sink.push(&slice, "closer_to_weighted_mid", v, c);
                let ties = (row.weighted_mid.count > 0)
                    .then(|| row.weighted_mid_ties as f64 / row.weighted_mid.count as f64);
                sink.push(&slice, "ties", ties, c);
            }
            _ => {}
        }
    }
}

/// `(x, P[X ≥ x])` at no more than `CCDF_POINTS` of the distinct values,
/// always keeping the first and last.
pub fn thin_ccdf(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= CCDF_POINTS {
        return points.to_vec();
    }
    let last = points.len() - 1;
    let mut idx: Vec<usize> = (0..CCDF_POINTS).map(|j| j * last / (CCDF_POINTS - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|i| points[i]).collect()
}

fn ccdf_rows(sink: &mut RowSink<'_>, prefix: &str, points: &[(f64, f64)], n: usize) {
    for (i, (x, p)) in thin_ccdf(points).into_iter().enumerate() {
        sink.push(i, &format!("{prefix}_x"), Some(x), Some(n));
        sink.push(i, &format!("{prefix}_p"), Some(p), Some(n));
    }
}

fn spread_tables(out: &mut JobOut, key: &str, side: AuctionSide, days: &[&DayAuctionSeries], tables: &[Table], width: TimeMs, pooled: bool) {
    let selected: Vec<Table> = tables.iter().copied().filter(|t| t.is_spread()).collect();
    let table: SpreadTable<f64> = match spread_metrics(days.iter().copied(), width) {
        Ok(t) => t,
        Err(e) => {
            out.warnings.push(format!("{key}/{side}: spread metrics: {e}"));
            return;
        }
    };
    for row in table.slices.iter().chain(std::iter::once(&table.overall)) {
        spread_rows(out, key, side, row, &selected);
    }
    if pooled && selected.contains(&Table::Fig10Spread) {
        let mut sink = out.tables.sink(Table::Fig10Spread, key, side);
        ccdf_rows(&mut sink, "delta_m_ccdf", &table.delta_m_ccdf(), table.delta_m.len());
    }
}

fn series_job(key: &str, side: AuctionSide, days: &[&DayAuctionSeries], tables: &[Table], th: &Thresholds, pooled: bool) -> JobOut {
    let mut out = JobOut::default();
    let width = th.slice_ms();
    if tables.contains(&Table::Fig4Activity) {
        let curve = activity_curve::<f64>(days.iter().copied(), width);
        let mut sink = out.tables.sink(Table::Fig4Activity, key, side);
        for (k, (mean, median)) in curve.mean.iter().zip(&curve.median).enumerate() {
            sink.push(k, "mean", Some(*mean), Some(curve.days));
            sink.push(k, "median", Some(*median), Some(curve.days));
        }
    }
    if tables.contains(&Table::Fig5Fraction) {
        fraction_tables(&mut out, key, side, days, width);
    }
    if tables.contains(&Table::Fig6Hurst) {
        hurst_table(&mut out, key, side, days, th);
    }
    if tables.contains(&Table::Fig7Reduction) {
        reduction_table(&mut out, key, side, days, width);
    }
    if tables.iter().any(|t| matches!(t, Table::Fig8Response | Table::Fig9Conditional)) {
        response_tables(&mut out, key, side, days, tables, width);
    }
    if tables.iter().any(|t| t.is_spread()) {
        spread_tables(&mut out, key, side, days, tables, width, pooled);
    }
    out
}

/// Shares of asset-level outcomes, appended to the pooled rows.
fn cross_asset_rows(out: &mut JobOut, side: AuctionSide, assets: &[&JobOut], tables: &[Table]) {
    if tables.contains(&Table::Fig5Fraction) {
        let shapes: Vec<CurveShape> = assets.iter().filter_map(|a| a.shape).collect();
        let mut sink = out.tables.sink(Table::Fig5Fraction, POOLED_KEY, side);
        for shape in [CurveShape::Linear, CurveShape::Convex, CurveShape::Concave, CurveShape::Undecidable] {
            let n = shapes.iter().filter(|&&s| s == shape).count();
            let share = (!shapes.is_empty()).then(|| n as f64 / shapes.len() as f64);
            sink.push(OVERALL_SLICE, &format!("asset_share_{}", shape.as_str()), share, Some(shapes.len()));
        }
    }
    if tables.contains(&Table::Fig6Hurst) {
        let fits: Vec<(f64, bool)> = assets.iter().filter_map(|a| a.hurst).collect();
        let mut sink = out.tables.sink(Table::Fig6Hurst, POOLED_KEY, side);
        let sub = fits.iter().filter(|f| f.1).count();
        let share = (!fits.is_empty()).then(|| sub as f64 / fits.len() as f64);
        sink.push(OVERALL_SLICE, "asset_share_sub_diffusive", share, Some(fits.len()));
        let hs: Vec<f64> = fits.iter().map(|f| f.0).collect();
        sink.push(OVERALL_SLICE, "asset_median_hurst", auctionlab::metrics::median(&hs), Some(fits.len()));
    }
}

fn volume_tables(tables: &[Table], volumes: &[DailyVolume], th: &Thresholds, out: &mut JobOut) {
    if tables.contains(&Table::Table1Ratios) && !volumes.is_empty() {
        match ratio_summary::<f64>(volumes) {
            Ok(rows) => {
                for r in rows {
                    let mut sink = RowSink::new(&mut out.tables.0[Table::Table1Ratios as usize], r.exchange.as_str(), r.side.as_str());
                    let n = Some(r.n);
                    sink.push(OVERALL_SLICE, "mean_log10", Some(r.mean_log10), n);
                    sink.push(OVERALL_SLICE, "two_sd_log10", Some(r.two_sd_log10), n);
                    sink.push(OVERALL_SLICE, "typical", Some(r.typical), n);
                    sink.push(OVERALL_SLICE, "excluded", Some(r.excluded as f64), None);
                }
            }
            Err(e) => out.warnings.push(format!("volume ratios: {e}")),
        }
    }
    if tables.contains(&Table::Fig3Monthly) {
        for m in monthly_median_ratio::<f64>(volumes, th.min_assets) {
            let mut sink = RowSink::new(&mut out.tables.0[Table::Fig3Monthly as usize], m.exchange.as_str(), m.side.as_str());
            sink.push(format!("{:04}-{:02}", m.year, m.month), "median", Some(m.median), Some(m.assets));
        }
    }
}

/// Per-auction tail analysis of executed order values `p^x · filled`.
struct TailOut {
    key: SeriesKey,
    values: Vec<f64>,
    rows: Vec<Row>,
    warnings: Vec<String>,
    /// p-value of lognormal against exponential on the whole sample.
    heavy_p: Option<f64>,
    /// p-values of power law against each alternative.
    vuong_p: Vec<(TailFamily, f64)>,
}

fn tail_job(
    key: &SeriesKey,
    tape: &[TapeEvent],
    record: Option<&AuctionRecord>,
    min_orders: usize,
) -> Result<TailOut, CliError> {
    let replayed = replay_auction(key, tape, record, None)?;
    let mut out = TailOut {
        key: key.clone(),
        values: Vec::new(),
        rows: Vec::new(),
        warnings: Vec::new(),
        heavy_p: None,
        vuong_p: Vec::new(),
    };
    let Some(price) = replayed.replay.result.final_price else {
        return Ok(out);
    };
    out.values = replayed
        .replay
        .result
        .executed()
        .map(|f| price as f64 * f.filled as f64)
        .collect();
    out.values.sort_by(f64::total_cmp);
    let n = out.values.len();
    if n <= min_orders {
        return Ok(out);
    }
    let mut sink = RowSink::new(&mut out.rows, key.asset.as_str(), key.side.as_str());
    let date = key.date.to_string();
    sink.push(&date, "executed_orders", Some(n as f64), Some(n));
    let lo = out.values[0];
    let heavy = fit_tail(&out.values, TailFamily::LogNormal, lo)
        .and_then(|ln| Ok((ln, fit_tail(&out.values, TailFamily::Exponential, lo)?)))
        .and_then(|(ln, ex)| vuong_test(&ln, &ex));
    match heavy {
        Ok(v) => {
            sink.push(&date, "lognormal_vs_exponential_statistic", Some(v.statistic), Some(n));
            sink.push(&date, "lognormal_vs_exponential_p", Some(v.p_value_one_sided), Some(n));
            out.heavy_p = Some(v.p_value_one_sided);
        }
        Err(e) => out.warnings.push(format!("{key}: heavy-tail test: {e}")),
    }
    let choice = match select_xmin_detailed(&out.values) {
        Ok(c) => c,
        Err(e) => {
            out.warnings.push(format!("{key}: xmin: {e}"));
            return Ok(out);
        }
    };
    let pl = match fit_tail(&out.values, TailFamily::PowerLaw, choice.xmin) {
        Ok(f) => f,
        Err(e) => {
            out.warnings.push(format!("{key}: power-law fit: {e}"));
            return Ok(out);
        }
    };
    let n_tail = Some(pl.n_tail);
    sink.push(&date, "xmin", Some(choice.xmin), n_tail);
    sink.push(&date, "ks_distance", Some(choice.ks_distance), n_tail);
    if let TailModel::PowerLaw { alpha } = pl.model {
        sink.push(&date, "alpha", Some(alpha), n_tail);
    }
    for alt in [TailFamily::LogNormal, TailFamily::Exponential, TailFamily::TruncatedPowerLaw] {
        let test = fit_tail(&out.values, alt, choice.xmin).and_then(|f| vuong_test(&pl, &f));
        match test {
            Ok(v) => {
                sink.push(&date, &format!("powerlaw_vs_{}_statistic", alt.name()), Some(v.statistic), n_tail);
                sink.push(&date, &format!("powerlaw_vs_{}_p", alt.name()), Some(v.p_value_one_sided), n_tail);
                out.vuong_p.push((alt, v.p_value_one_sided));
            }
            Err(e) => out.warnings.push(format!("{key}: powerlaw vs {alt}: {e}")),
        }
    }
    Ok(out)
}

fn tail_tables(inputs: &Inputs, th: &Thresholds, out: &mut JobOut) -> Result<usize, CliError> {
    let results: Vec<TailOut> = inputs
        .tapes
        .par_iter()
        .map(|(key, tape)| tail_job(key, tape, inputs.auctions.get(key), th.min_orders))
        .collect::<Result<_, _>>()?;
    let replayed = results.len();
    let mut by_asset: BTreeMap<(String, AuctionSide), Vec<f64>> = BTreeMap::new();
    let rows = &mut out.tables.0[Table::Fig1Fig2Tails as usize];
    for r in &results {
        rows.extend(r.rows.iter().cloned());
        out.warnings.extend(r.warnings.iter().cloned());
        by_asset
            .entry((r.key.asset.clone(), r.key.side))
            .or_default()
            .extend_from_slice(&r.values);
    }
    for ((asset, side), mut values) in by_asset {
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in values.iter().enumerate() {
            if points.last().is_none_or(|&(prev, _)| prev != x) {
                points.push((x, (n - i) as f64 / n as f64));
            }
        }
        ccdf_rows(&mut RowSink::new(rows, asset, side.as_str()), "value_ccdf", &points, n);
    }
    for side in AuctionSide::BOTH {
        let fitted: Vec<&TailOut> = results.iter().filter(|r| r.key.side == side && !r.rows.is_empty()).collect();
        if fitted.is_empty() {
            continue;
        }
        let mut sink = RowSink::new(rows, POOLED_KEY, side.as_str());
        let share = |ps: &[f64], below: bool| -> Option<f64> {
            let hits = ps
                .iter()
                .filter(|&&p| if below { p < TAIL_LEVEL } else { p > 1.0 - TAIL_LEVEL })
                .count();
            (!ps.is_empty()).then(|| hits as f64 / ps.len() as f64)
        };
        let heavy: Vec<f64> = fitted.iter().filter_map(|r| r.heavy_p).collect();
        sink.push(OVERALL_SLICE, "lognormal_vs_exponential_share_p_below_0.01", share(&heavy, true), Some(heavy.len()));
        sink.push(OVERALL_SLICE, "lognormal_vs_exponential_share_p_above_0.99", share(&heavy, false), Some(heavy.len()));
        for alt in [TailFamily::LogNormal, TailFamily::Exponential, TailFamily::TruncatedPowerLaw] {
            let ps: Vec<f64> = fitted
                .iter()
                .flat_map(|r| r.vuong_p.iter().filter(|(f, _)| *f == alt).map(|(_, p)| *p))
                .collect();
            sink.push(OVERALL_SLICE, &format!("powerlaw_vs_{}_share_p_below_0.01", alt.name()), share(&ps, true), Some(ps.len()));
            sink.push(OVERALL_SLICE, &format!("powerlaw_vs_{}_share_p_above_0.99", alt.name()), share(&ps, false), Some(ps.len()));
        }
    }
    Ok(replayed)
}

/// Runs the selected estimators over the dataset in `opts.input` and writes
/// one CSV per table into `opts.output`.
pub fn analyze(opts: &AnalyzeOptions) -> Result<AnalysisManifest, CliError> {
    opts.thresholds.validate()?;
    let mut warnings = Warnings(0);
    let tables = &opts.tables;
    let inputs = load(&opts.input, tables, &mut warnings)?;
    let th = &opts.thresholds;

    let mut groups: BTreeMap<(&str, AuctionSide), Vec<&DayAuctionSeries>> = BTreeMap::new();
    for s in &inputs.series {
        groups.entry((s.key.asset.as_str(), s.key.side)).or_default().push(s);
    }
    for days in groups.values_mut() {
        days.sort_by_key(|s| s.key.date);
    }
    let per_series: Vec<Table> = tables.iter().copied().filter(|t| t.needs_feed()).collect();

    let mut all = JobOut::default();
    if !per_series.is_empty() && !groups.is_empty() {
        let group_list: Vec<(&(&str, AuctionSide), &Vec<&DayAuctionSeries>)> = groups.iter().collect();
        let asset_out: Vec<JobOut> = group_list
            .par_iter()
            .map(|((asset, side), days)| series_job(asset, *side, days, &per_series, th, false))
            .collect();
        let pooled: Vec<JobOut> = AuctionSide::BOTH
            .par_iter()
            .map(|&side| {
                let days: Vec<&DayAuctionSeries> = group_list
                    .iter()
                    .filter(|((_, s), _)| *s == side)
                    .flat_map(|(_, d)| d.iter().copied())
                    .collect();
                if days.is_empty() {
                    return JobOut::default();
                }
                let side_assets: Vec<&JobOut> = group_list
                    .iter()
                    .zip(&asset_out)
                    .filter(|(((_, s), _), _)| *s == side)
                    .map(|(_, o)| o)
                    .collect();
                let mut out = series_job(POOLED_KEY, side, &days, &per_series, th, true);
                cross_asset_rows(&mut out, side, &side_assets, &per_series);
                out
            })
            .collect();
        for o in asset_out.into_iter().chain(pooled) {
            all.tables.extend(o.tables);
            all.warnings.extend(o.warnings);
        }
    }
    volume_tables(tables, &inputs.volumes, th, &mut all);
    let auctions_replayed = if tables.contains(&Table::Fig1Fig2Tails) {
        tail_tables(&inputs, th, &mut all)?
    } else {
        0
    };
    for w in &all.warnings {
        warnings.emit(w);
    }

    let dir = &opts.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = BTreeMap::new();
    for &t in tables {
        let rows = &all.tables.0[t as usize];
        write_table(&dir.join(t.file_name()), rows)?;
        written.insert(t.name(), rows.len());
    }
    let manifest = AnalysisManifest {
        command: "analyze",
        thresholds: *th,
        tables: written,
        series: inputs.series.len(),
        volume_records: inputs.volumes.len(),
        auctions_replayed,
        warnings: warnings.0,
    };
    write_json(&dir.join(ANALYSIS_MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
