//! Pre-auction order book with incremental clearing.
//!
//! The clearing price maximizes the matched volume `min(B(p), S(p))` over the
//! candidate prices (resident limit prices plus the reference price). Ties
//! go to the candidate closest to the reference price, then to the lower
//! price. Because `B` is non-increasing and `S` non-decreasing, the set of
//! volume-maximizing ticks is an interval `[lo, hi]`; the winner is the
//! candidate in that interval nearest to the reference.

mod ladder;
mod order;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Shares, Tick, TimeMs};
use ladder::{Channel, VolumeTree};

pub use ladder::MAX_TICK;
pub use order::{AuctionOrder, OrderId, OrderKind, Phase, Side};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("auction is closed")]
    AuctionClosed,
    #[error("order {id} does not reduce |imbalance| ({before} -> {after})")]
    ImbalanceWorsening { id: OrderId, before: i64, after: i64 },
    #[error("duplicate order id {0}")]
    DuplicateId(OrderId),
    #[error("unknown order id {0}")]
    UnknownId(OrderId),
    #[error("phase cannot move backwards from {from:?} to {to:?}")]
    BackwardTransition { from: Phase, to: Phase },
    #[error("invalid order {id}: {reason}")]
    InvalidOrder { id: OrderId, reason: &'static str },
}

/// Indicative state of the book: price, matched volume, buy-positive imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClearingResult {
    pub price: Option<Tick>,
    pub matched_volume: Shares,
    pub imbalance: i64,
}

/// One disseminated feed record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndicativeUpdate {
    pub time_ms: TimeMs,
    pub price: Option<Tick>,
    pub matched_volume: Shares,
    pub imbalance: i64,
}

impl IndicativeUpdate {
    pub fn new(time_ms: TimeMs, clearing: ClearingResult) -> Self {
        IndicativeUpdate {
            time_ms,
            price: clearing.price,
            matched_volume: clearing.matched_volume,
            imbalance: clearing.imbalance,
        }
    }

    pub fn clearing(&self) -> ClearingResult {
        ClearingResult {
            price: self.price,
            matched_volume: self.matched_volume,
            imbalance: self.imbalance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub order_id: OrderId,
    pub side: Side,
    pub size: Shares,
    pub filled: Shares,
}

impl Fill {
    pub fn residual(&self) -> Shares {
        self.size - self.filled
    }
}

/// Outcome of the auction. `fills` lists every order resident at the close,
/// including those left unexecuted; it is empty when the book does not cross.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionResult {
    pub final_price: Option<Tick>,
    pub total_matched: Shares,
    pub fills: Vec<Fill>,
}

impl AuctionResult {
    pub fn crossed(&self) -> bool {
        self.final_price.is_some()
    }

    /// Executed orders only, with their filled size.
    pub fn executed(&self) -> impl Iterator<Item = &Fill> {
        self.fills.iter().filter(|f| f.filled > 0)
    }
}

#[derive(Debug, Clone)]
struct Resident {
    order: AuctionOrder,
    seq: u64,
}

#[derive(Debug, Clone, Default)]
struct Level {
    volume: Shares,
    queue: BTreeMap<u64, OrderId>,
}

#[derive(Debug, Clone)]
pub struct AuctionBook {
    reference_price: Tick,
    phase: Phase,
    phase_times: Vec<(Phase, TimeMs)>,
    tree: VolumeTree,
    buy_levels: BTreeMap<Tick, Level>,
    sell_levels: BTreeMap<Tick, Level>,
    market_buy: Level,
    market_sell: Level,
    orders: HashMap<OrderId, Resident>,
    seen: HashSet<OrderId>,
    next_seq: u64,
    clearing: ClearingResult,
}

impl AuctionBook {
    /// Empty book; `reference_price` is the previous close in ticks.
    pub fn new(reference_price: Tick) -> Self {
        assert!(
            reference_price > 0 && reference_price < MAX_TICK,
            "reference price out of range"
        );
        AuctionBook {
            reference_price,
            phase: Phase::Open,
            phase_times: Vec::new(),
            tree: VolumeTree::default(),
            buy_levels: BTreeMap::new(),
            sell_levels: BTreeMap::new(),
            market_buy: Level::default(),
            market_sell: Level::default(),
            orders: HashMap::new(),
            seen: HashSet::new(),
            next_seq: 0,
            clearing: ClearingResult::default(),
        }
    }

    /// Builds a book from scratch by submitting `orders` in open phase.
    pub fn from_orders<'a>(
        reference_price: Tick,
        orders: impl IntoIterator<Item = &'a AuctionOrder>,
    ) -> Result<Self, BookError> {
        let mut book = AuctionBook::new(reference_price);
        for o in orders {
            book.insert(o.clone())?;
        }
        book.clearing = book.compute_clearing();
        Ok(book)
    }

    pub fn reference_price(&self) -> Tick {
        self.reference_price
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Times at which each phase change took effect.
    pub fn phase_times(&self) -> &[(Phase, TimeMs)] {
        &self.phase_times
    }

    pub fn market_buy(&self) -> Shares {
        self.market_buy.volume
    }

    pub fn market_sell(&self) -> Shares {
        self.market_sell.volume
    }

    /// Current indicative state, maintained after every event.
    pub fn clearing(&self) -> ClearingResult {
        self.clearing
    }

    pub fn resident_count(&self) -> usize {
        self.orders.len()
    }

    pub fn contains(&self, id: OrderId) -> bool {
        self.orders.contains_key(&id)
    }

    pub fn resident_orders(&self) -> impl Iterator<Item = &AuctionOrder> {
        self.orders.values().map(|r| &r.order)
    }

    /// Aggregate resting limit volume per price, ascending.
    pub fn buy_levels(&self) -> impl Iterator<Item = (Tick, Shares)> + '_ {
        self.buy_levels.iter().map(|(p, l)| (*p, l.volume))
    }

    pub fn sell_levels(&self) -> impl Iterator<Item = (Tick, Shares)> + '_ {
        self.sell_levels.iter().map(|(p, l)| (*p, l.volume))
    }

    /// Cumulative demand and supply at `p`.
    pub fn demand_supply_at(&self, p: Tick) -> (Shares, Shares) {
        (self.demand_at(p), self.supply_at(p))
    }

    fn demand_at(&self, p: Tick) -> Shares {
        let total = self.tree.total(Channel::Buy);
        self.market_buy.volume + total - self.tree.prefix(Channel::Buy, p - 1)
    }

    fn supply_at(&self, p: Tick) -> Shares {
        self.market_sell.volume + self.tree.prefix(Channel::Sell, p)
    }

    /// Recomputes the clearing state from the ladder in `O(log P)`.
    pub fn compute_clearing(&self) -> ClearingResult {
        let mb = self.market_buy.volume;
        let ms = self.market_sell.volume;
        let total_buy = self.tree.total(Channel::Buy);
        let total_sell = self.tree.total(Channel::Sell);

        // Smallest tick c with S(c) >= B(c).
        let target = (mb + total_buy).saturating_sub(ms);
        let crossing = self.tree.lower_bound(Channel::Shifted, target);
        let best = match crossing {
            None => ms + total_sell,
            Some(c) => {
                let right = self.demand_at(c);
                let left = if c > 0 { self.supply_at(c - 1) } else { 0 };
                right.max(left)
            }
        };
        if best == 0 {
            return ClearingResult {
                price: None,
                matched_volume: 0,
                imbalance: mb as i64 - ms as i64,
            };
        }

        // Ticks with S(p) >= best form [lo, ..); ticks with B(p) >= best form (.., hi].
        let lo = match best.checked_sub(ms) {
            Some(need) if need > 0 => self
                .tree
                .lower_bound(Channel::Sell, need)
                .expect("supply reaches the maximum"),
            _ => 0,
        };
        let hi = match best.checked_sub(mb) {
            Some(need) if need > 0 => {
                // Largest p with buys(<= p - 1) <= total_buy - need.
                let allowed = total_buy - need;
                self.tree
                    .lower_bound(Channel::Buy, allowed + 1)
                    .unwrap_or(MAX_TICK)
            }
            _ => MAX_TICK,
        };

        let r = self.reference_price;
        let price = if (lo..=hi).contains(&r) {
            r
        } else if r < lo {
            let b = self.buy_levels.range(lo..=hi).next().map(|(p, _)| *p);
            let s = self.sell_levels.range(lo..=hi).next().map(|(p, _)| *p);
            b.into_iter().chain(s).min().expect("a candidate attains the maximum")
        } else {
            let b = self.buy_levels.range(lo..=hi).next_back().map(|(p, _)| *p);
            let s = self.sell_levels.range(lo..=hi).next_back().map(|(p, _)| *p);
            b.into_iter().chain(s).max().expect("a candidate attains the maximum")
        };
        let (demand, supply) = self.demand_supply_at(price);
        debug_assert_eq!(demand.min(supply), best);
        ClearingResult {
            price: Some(price),
            matched_volume: best,
            imbalance: demand as i64 - supply as i64,
        }
    }

    fn validate(&self, order: &AuctionOrder) -> Result<(), BookError> {
        let invalid = |reason| BookError::InvalidOrder {
            id: order.id,
            reason,
        };
        if order.size == 0 {
            return Err(invalid("size must be positive"));
        }
        if let OrderKind::Limit(p) = order.kind {
            if p <= 0 || p >= MAX_TICK {
                return Err(invalid("limit price out of range"));
            }
        }
        if self.seen.contains(&order.id) {
            return Err(BookError::DuplicateId(order.id));
        }
        Ok(())
    }

    fn insert(&mut self, order: AuctionOrder) -> Result<(), BookError> {
        self.validate(&order)?;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.apply(&order, seq, true);
        self.seen.insert(order.id);
        self.orders.insert(order.id, Resident { order, seq });
        Ok(())
    }

    fn apply(&mut self, order: &AuctionOrder, seq: u64, add: bool) {
        let size = order.size;
        let delta = if add { size as i64 } else { -(size as i64) };
        let level = match (order.kind, order.side) {
            (OrderKind::Market, Side::Buy) => &mut self.market_buy,
            (OrderKind::Market, Side::Sell) => &mut self.market_sell,
            (OrderKind::Limit(p), Side::Buy) => {
                self.tree.add(Channel::Buy, p, delta);
                self.tree.add(Channel::Shifted, p + 1, delta);
                self.buy_levels.entry(p).or_default()
            }
            (OrderKind::Limit(p), Side::Sell) => {
                self.tree.add(Channel::Sell, p, delta);
                self.tree.add(Channel::Shifted, p, delta);
                self.sell_levels.entry(p).or_default()
            }
        };
        if add {
            level.volume += size;
            level.queue.insert(seq, order.id);
        } else {
            level.volume -= size;
            level.queue.remove(&seq);
        }
        if !add {
            match (order.kind, order.side) {
                (OrderKind::Limit(p), Side::Buy) if self.buy_levels[&p].volume == 0 => {
                    self.buy_levels.remove(&p);
                }
                (OrderKind::Limit(p), Side::Sell) if self.sell_levels[&p].volume == 0 => {
                    self.sell_levels.remove(&p);
                }
                _ => {}
            }
        }
    }

    fn remove(&mut self, id: OrderId) -> Result<Resident, BookError> {
        let resident = self.orders.remove(&id).ok_or(BookError::UnknownId(id))?;
        self.apply(&resident.order, resident.seq, false);
        Ok(resident)
    }

    /// Adds an order and returns the new indicative update stamped with its
    /// submit time. In the restricted phase the order must strictly reduce
    /// the absolute imbalance, otherwise the book is left untouched.
    pub fn submit_order(&mut self, order: AuctionOrder) -> Result<IndicativeUpdate, BookError> {
        if self.phase == Phase::Closed {
            return Err(BookError::AuctionClosed);
        }
        let time = order.submit_time;
        let id = order.id;
        let before = self.clearing;
        self.insert(order)?;
        let after = self.compute_clearing();
        if self.phase == Phase::Restricted && after.imbalance.abs() >= before.imbalance.abs() {
            let resident = self.orders.remove(&id).expect("just inserted");
            self.apply(&resident.order, resident.seq, false);
            self.seen.remove(&id);
            return Err(BookError::ImbalanceWorsening {
                id,
                before: before.imbalance,
                after: after.imbalance,
            });
        }
        self.clearing = after;
        Ok(IndicativeUpdate::new(time, after))
    }

    /// Removes a resident order. Restricted-phase cancellations follow the
    /// same rule as submissions: they must strictly reduce |imbalance|.
    pub fn cancel_order(&mut self, id: OrderId, time: TimeMs) -> Result<IndicativeUpdate, BookError> {
        if self.phase == Phase::Closed {
            return Err(BookError::AuctionClosed);
        }
        let before = self.clearing;
        let resident = self.remove(id)?;
        let after = self.compute_clearing();
        if self.phase == Phase::Restricted && after.imbalance.abs() >= before.imbalance.abs() {
            self.apply(&resident.order, resident.seq, true);
            self.orders.insert(id, resident);
            return Err(BookError::ImbalanceWorsening {
                id,
                before: before.imbalance,
                after: after.imbalance,
            });
        }
        self.clearing = after;
        Ok(IndicativeUpdate::new(time, after))
    }

    /// Moves the phase forward. Setting the current phase again is a no-op.
    pub fn set_phase(&mut self, phase: Phase, time: TimeMs) -> Result<(), BookError> {
        if phase < self.phase {
            return Err(BookError::BackwardTransition {
                from: self.phase,
                to: phase,
            });
        }
        if phase != self.phase {
            self.phase = phase;
            self.phase_times.push((phase, time));
        }
        Ok(())
    }

    /// Closes the book and allocates fills at the clearing price by
    /// price/time priority: market orders first, then better-priced limits,
    /// FIFO within a price.
    pub fn finalize_auction(&mut self, time: TimeMs) -> Result<AuctionResult, BookError> {
        if self.phase == Phase::Closed {
            return Err(BookError::AuctionClosed);
        }
        let clearing = self.compute_clearing();
        self.set_phase(Phase::Closed, time)?;
        let Some(price) = clearing.price else {
            return Ok(AuctionResult {
                final_price: None,
                total_matched: 0,
                fills: Vec::new(),
            });
        };
        let total = clearing.matched_volume;

        let buy_queue = self
            .market_buy
            .queue
            .values()
            .chain(self.buy_levels.range(price..).rev().flat_map(|(_, l)| l.queue.values()));
        let sell_queue = self
            .market_sell
            .queue
            .values()
            .chain(self.sell_levels.range(..=price).flat_map(|(_, l)| l.queue.values()));

        let mut filled: HashMap<OrderId, Shares> = HashMap::new();
        for queue in [
            Box::new(buy_queue) as Box<dyn Iterator<Item = &OrderId>>,
            Box::new(sell_queue),
        ] {
            let mut left = total;
            for id in queue {
                if left == 0 {
                    break;
                }
                let size = self.orders[id].order.size;
                let take = size.min(left);
                left -= take;
                filled.insert(*id, take);
            }
            debug_assert_eq!(left, 0);
        }

        let mut fills: Vec<(u64, Fill)> = self
            .orders
            .iter()
            .map(|(id, r)| {
                (
                    r.seq,
                    Fill {
                        order_id: *id,
                        side: r.order.side,
                        size: r.order.size,
                        filled: filled.get(id).copied().unwrap_or(0),
                    },
                )
            })
            .collect();
        fills.sort_by_key(|(seq, _)| *seq);
        Ok(AuctionResult {
            final_price: Some(price),
            total_matched: total,
            fills: fills.into_iter().map(|(_, f)| f).collect(),
        })
    }
}
