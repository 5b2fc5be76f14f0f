use serde::{Deserialize, Serialize};

use crate::book::IndicativeUpdate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NewBuy,
    NewSell,
    Cancel,
    Indeterminate,
}

/// What an indicative update reveals about the event behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventClass {
    pub kind: EventKind,
    /// `+1` buy pressure, `-1` sell pressure, `0` unknown.
    pub sign: i8,
    /// Whether the event pushed the imbalance towards the other side; `None`
    /// when either the prior imbalance or its change is zero.
    pub improves: Option<bool>,
}

fn sign(x: i64) -> i8 {
    x.signum() as i8
}

/// Infers the event between two consecutive updates from the changes in
/// imbalance and matched volume alone.
pub fn classify_event(prev: &IndicativeUpdate, next: &IndicativeUpdate) -> EventClass {
    let di = next.imbalance - prev.imbalance;
    let dw = next.matched_volume as i128 - prev.matched_volume as i128;
    let (kind, s) = if dw < 0 {
        // a removed sell raises I, a removed buy lowers it
        (EventKind::Cancel, -sign(di))
    } else if dw > 0 && di > 0 {
        (EventKind::NewBuy, 1)
    } else if dw > 0 && di < 0 {
        (EventKind::NewSell, -1)
    } else {
        (EventKind::Indeterminate, 0)
    };
    let improves = match (sign(prev.imbalance), sign(di)) {
        (0, _) | (_, 0) => None,
        (a, b) => Some(a * b == -1),
    };
    EventClass {
        kind,
        sign: s,
        improves,
    }
}
