//! Long-format result tables: one statistic per row.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub const TABLE_HEADER: [&str; 6] = ["key", "side", "slice", "statistic", "value", "count"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub key: String,
    pub side: String,
    pub slice: String,
    pub statistic: String,
    pub value: String,
    pub count: String,
}

/// Rows sharing a key and side.
pub struct RowSink<'a> {
    rows: &'a mut Vec<Row>,
    key: String,
    side: String,
}

impl<'a> RowSink<'a> {
    pub fn new(rows: &'a mut Vec<Row>, key: impl Into<String>, side: impl Into<String>) -> Self {
        RowSink {
            rows,
            key: key.into(),
            side: side.into(),
        }
    }

    /// An empty `value` marks an undefined statistic.
    pub fn push(&mut self, slice: impl Display, statistic: &str, value: Option<f64>, count: Option<usize>) {
        self.rows.push(Row {
            key: self.key.clone(),
            side: self.side.clone(),
            slice: slice.to_string(),
            statistic: statistic.to_string(),
            value: value.map(fmt_value).unwrap_or_default(),
            count: count.map(|c| c.to_string()).unwrap_or_default(),
        });
    }

    pub fn label(&mut self, slice: impl Display, statistic: &str, value: &str, count: Option<usize>) {
        self.rows.push(Row {
            key: self.key.clone(),
            side: self.side.clone(),
            slice: slice.to_string(),
            statistic: statistic.to_string(),
            value: value.to_string(),
            count: count.map(|c| c.to_string()).unwrap_or_default(),
        });
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v != 0.0 && (v.abs() < 1e-5 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_table(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| CliError::io(path, e.into());
    w.write_record(TABLE_HEADER).map_err(wrap)?;
    for r in rows {
        w.write_record([&r.key, &r.side, &r.slice, &r.statistic, &r.value, &r.count])
            .map_err(wrap)?;
    }
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}
