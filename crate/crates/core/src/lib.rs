//! Call-auction simulation and pre-auction analytics.
//!
//! The crate is split along the life of an auction dataset:
//!
//! * [`book`] keeps the pre-auction order book and disseminates the
//!   indicative price, matched volume and imbalance after every event.
//! * [`flow`] generates reproducible synthetic order tapes, quote series and
//!   volume panels.
//! * [`ingest`] reads and writes the CSV schemas and assembles per-day series.
//! * [`stats`] holds the shared fitting machinery (tail fits, Vuong test,
//!   polynomial and log-log regressions).
//! * [`metrics`] implements the pre-auction estimators on top of the above.
//!
//! Prices are integer ticks and all clearing arithmetic is exact. The
//! statistical layers are generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`, which is what the command-line driver uses.

pub mod book;
pub mod flow;
pub mod ingest;
pub mod metrics;
mod scalar;
pub mod stats;

pub use scalar::Real;

/// Price in integer ticks.
pub type Tick = i64;
/// Share count.
pub type Shares = u64;
/// Milliseconds since the local session start.
pub type TimeMs = i64;


pub type TailFit64 = stats::TailFit<f64>;
pub type FitResult64 = stats::FitResult<f64>;
pub type VuongResult64 = stats::VuongResult<f64>;
pub type LogLogFit64 = stats::LogLogFit<f64>;
pub type ResponseCurve64 = metrics::ResponseCurve<f64>;
pub type SpreadTable64 = metrics::SpreadTable<f64>;
