use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Shares, Tick, TimeMs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

/// Limit orders carry their price; market orders have none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderKind {
    Limit(Tick),
    Market,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOrder {
    pub id: OrderId,
    pub side: Side,
    pub kind: OrderKind,
    pub size: Shares,
    pub submit_time: TimeMs,
}

impl AuctionOrder {
    pub fn limit(id: u64, side: Side, price: Tick, size: Shares, submit_time: TimeMs) -> Self {
        AuctionOrder {
            id: OrderId(id),
            side,
            kind: OrderKind::Limit(price),
            size,
            submit_time,
        }
    }

    pub fn market(id: u64, side: Side, size: Shares, submit_time: TimeMs) -> Self {
        AuctionOrder {
            id: OrderId(id),
            side,
            kind: OrderKind::Market,
            size,
            submit_time,
        }
    }

    pub fn price(&self) -> Option<Tick> {
        match self.kind {
            OrderKind::Limit(p) => Some(p),
            OrderKind::Market => None,
        }
    }

    pub fn is_market(&self) -> bool {
        matches!(self.kind, OrderKind::Market)
    }

    /// Whether the order participates at clearing price `p`.
    pub fn executable_at(&self, p: Tick) -> bool {
        match (self.kind, self.side) {
            (OrderKind::Market, _) => true,
            (OrderKind::Limit(limit), Side::Buy) => limit >= p,
            (OrderKind::Limit(limit), Side::Sell) => limit <= p,
        }
    }
}

/// Auction phases. Transitions only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Open,
    Restricted,
    Closed,
}
