//! Sparse segment tree over the tick axis.
//!
//! Every node keeps three sums over its tick range: resting buy volume,
//! resting sell volume, and a "shifted" channel in which buy volume at tick
//! `p` is booked at `p + 1`. The shifted prefix at `p` equals
//! `sells(<= p) + buys(<= p - 1)`, which is the quantity whose lower bound
//! locates the demand/supply crossing in a single descent.
//!
//! The root spans `[0, 2^depth)` and doubles when a larger tick arrives, so
//! walks cost the bits of the highest price seen rather than the
//! full range.

use crate::{Shares, Tick};

pub(crate) const DEPTH: u32 = 40;
/// Exclusive upper bound on representable limit prices.
pub const MAX_TICK: Tick = (1 << DEPTH) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Channel {
    Buy = 0,
    Sell = 1,
    Shifted = 2,
}

#[derive(Debug, Clone, Copy, Default)]
struct Node {
    sums: [Shares; 3],
    children: [u32; 2],
}

#[derive(Debug, Clone)]
pub(crate) struct VolumeTree {
    nodes: Vec<Node>,
    depth: u32,
}

impl Default for VolumeTree {
    fn default() -> Self {
        VolumeTree {
            nodes: vec![Node::default()],
            depth: 1,
        }
    }
}

impl VolumeTree {
    pub fn total(&self, channel: Channel) -> Shares {
        self.nodes[0].sums[channel as usize]
    }

    /// Doubles the root span until it holds `tick`. The root stays at index
    /// 0; its old contents move to a new left child.
    fn grow_to(&mut self, tick: Tick) {
        while tick >> self.depth != 0 {
            let old = self.nodes[0];
            let moved = self.nodes.len() as u32;
            self.nodes.push(old);
            self.nodes[0].children = [moved, 0];
            self.depth += 1;
        }
    }

    /// Adds `delta` (possibly negative) to `channel` at `tick`.
    pub fn add(&mut self, channel: Channel, tick: Tick, delta: i64) {
        debug_assert!((0..=MAX_TICK).contains(&tick));
        self.grow_to(tick);
        let c = channel as usize;
        let mut idx = 0usize;
        let mut lo: Tick = 0;
        let mut span: Tick = 1 << self.depth;
        loop {
            let node = &mut self.nodes[idx];
            node.sums[c] = node.sums[c]
                .checked_add_signed(delta)
                .expect("ladder volume underflow");
            if span == 1 {
                return;
            }
            span /= 2;
            let dir = usize::from(tick >= lo + span);
            if dir == 1 {
                lo += span;
            }
            let mut child = self.nodes[idx].children[dir] as usize;
            if child == 0 {
                child = self.nodes.len();
                self.nodes.push(Node::default());
                self.nodes[idx].children[dir] = child as u32;
            }
            idx = child;
        }
    }

    /// Sum of `channel` over ticks `<= tick`. Negative ticks give zero.
    pub fn prefix(&self, channel: Channel, tick: Tick) -> Shares {
        if tick < 0 {
            return 0;
        }
        if tick >> self.depth != 0 {
            return self.total(channel);
        }
        let c = channel as usize;
        let mut acc = 0;
        let mut idx = 0usize;
        let mut lo: Tick = 0;
        let mut span: Tick = 1 << self.depth;
        loop {
            if span == 1 {
                return acc + self.nodes[idx].sums[c];
            }
            span /= 2;
            let [left, right] = self.nodes[idx].children;
            let next = if tick >= lo + span {
                if left != 0 {
                    acc += self.nodes[left as usize].sums[c];
                }
                lo += span;
                right
            } else {
                left
            };
            if next == 0 {
                return acc;
            }
            idx = next as usize;
        }
    }

    /// Smallest tick whose prefix sum on `channel` reaches `target` (> 0).
    pub fn lower_bound(&self, channel: Channel, target: Shares) -> Option<Tick> {
        let c = channel as usize;
        if target == 0 {
            return Some(0);
        }
        if self.nodes[0].sums[c] < target {
            return None;
        }
        let mut need = target;
        let mut idx = 0usize;
        let mut lo: Tick = 0;
        let mut span: Tick = 1 << self.depth;
        while span > 1 {
            span /= 2;
            let [left, right] = self.nodes[idx].children;
            let left_sum = if left == 0 {
                0
            } else {
                self.nodes[left as usize].sums[c]
            };
            if left_sum >= need {
                idx = left as usize;
            } else {
                need -= left_sum;
                lo += span;
                idx = right as usize;
            }
        }
        Some(lo)
    }
}
