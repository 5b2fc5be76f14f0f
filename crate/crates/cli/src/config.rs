use std::collections::BTreeMap;
use std::path::Path;

use auctionlab::flow::{FlowParams, PanelParams};
use auctionlab::ingest::{AuctionSide, Exchange};
use auctionlab::TimeMs;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The configuration compiled into the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// Environment variable naming a config file that replaces the bundled one.
pub const CONFIG_ENV: &str = "AUCTIONLAB_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub slice_seconds: u64,
    pub min_updates: usize,
    pub min_orders: usize,
    pub min_assets: usize,
}

impl Thresholds {
    pub fn slice_ms(&self) -> TimeMs {
        self.slice_seconds as TimeMs * 1000
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fields = [
            ("slice_seconds", self.slice_seconds as usize),
            ("min_updates", self.min_updates),
            ("min_orders", self.min_orders),
            ("min_assets", self.min_assets),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(CliError::input(format!("threshold {name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// A simulated panel: `assets × days` open and close auctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub assets: usize,
    pub days: usize,
    pub start: NaiveDate,
    /// Assets in the daily volume panel; defaults to `assets`.
    #[serde(default)]
    pub volume_assets: Option<usize>,
    #[serde(default)]
    pub flow: FlowParams,
    /// Laws of the daily volume panel; its size, dates and seed follow the
    /// preset.
    #[serde(default)]
    pub panel: PanelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub thresholds: Thresholds,
    /// Restricted phase length in seconds, by venue preset name.
    #[serde(default)]
    pub venues: BTreeMap<String, f64>,
    #[serde(default)]
    pub presets: BTreeMap<String, Preset>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::input(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn bundled() -> RunConfig {
        RunConfig::parse(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    /// Reads `path` when given, otherwise falls back to the bundled file.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        match path {
            None => Ok(RunConfig::bundled()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::input(format!("config {}: {e}", p.display())))?;
                RunConfig::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.thresholds.validate()?;
        for (name, &secs) in &self.venues {
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(CliError::input(format!("venue {name}: cut-off must be positive")));
            }
        }
        for (name, preset) in &self.presets {
            if preset.assets == 0 || preset.days == 0 {
                return Err(CliError::input(format!("preset {name}: needs at least one asset and day")));
            }
            preset
                .flow
                .validate()
                .map_err(|e| CliError::input(format!("preset {name}: {e}")))?;
        }
        Ok(())
    }

    pub fn venue(&self, name: &str) -> Result<f64, CliError> {
        self.venues.get(name).copied().ok_or_else(|| {
            let known: Vec<&str> = self.venues.keys().map(String::as_str).collect();
            CliError::input(format!("unknown venue preset {name} (known: {})", known.join(", ")))
        })
    }

    /// Cut-off of an auction held on `exchange`, if the venue table has one.
    pub fn venue_for(&self, exchange: Exchange, side: AuctionSide) -> Option<f64> {
        self.venues.get(&venue_name(exchange, side)).copied()
    }

    pub fn preset(&self, name: &str) -> Result<&Preset, CliError> {
        self.presets.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.presets.keys().map(String::as_str).collect();
            CliError::input(format!("unknown preset {name} (known: {})", known.join(", ")))
        })
    }
}

/// `"NYSE-close"` and so on.
pub fn venue_name(exchange: Exchange, side: AuctionSide) -> String {
    format!("{}-{}", exchange.as_str(), side.as_str())
}
