//! Inventory and PnL bookkeeping in one-lot units with FIFO netting.
//!
//! PnL is expressed as a fractional return on each lot's entry notional:
//! a long lot opened at `e` and closed at `x` earns `(x - e) / e`, a short
//! lot `(e - x) / e`. Open lots are marked the same way against the
//! midpoint. Fees are monetary and also charged against the closing lot's
//! entry notional.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::lob::Side;

/// A completed round trip of one lot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedTrade {
    /// `Bid` for a long position, `Ask` for a short one.
    pub position: Side,
    pub entry: f64,
    pub exit: f64,
    pub fee: f64,
    pub pnl: f64,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Account {
    lot_size: f64,
    longs: VecDeque<f64>,
    shorts: VecDeque<f64>,
    realized: f64,
    fees: f64,
    closed: Vec<ClosedTrade>,
}

impl Account {
    pub fn new(lot_size: f64) -> Self {
        Self {
            lot_size,
            longs: VecDeque::new(),
            shorts: VecDeque::new(),
            realized: 0.0,
            fees: 0.0,
            closed: Vec::new(),
        }
    }

    pub fn lot_size(&self) -> f64 {
        self.lot_size
    }

    /// Signed inventory count in lots.
    pub fn inventory(&self) -> i64 {
        self.longs.len() as i64 - self.shorts.len() as i64
    }

    pub fn long_lots(&self) -> usize {
        self.longs.len()
    }

    pub fn short_lots(&self) -> usize {
        self.shorts.len()
    }

    pub fn realized(&self) -> f64 {
        self.realized
    }

    /// Monetary fees paid.
    pub fn fees(&self) -> f64 {
        self.fees
    }

    pub fn closed_trades(&self) -> &[ClosedTrade] {
        &self.closed
    }

    pub fn average_price(&self, position: Side) -> Option<f64> {
        let lots = match position {
            Side::Bid => &self.longs,
            Side::Ask => &self.shorts,
        };
        (!lots.is_empty()).then(|| lots.iter().sum::<f64>() / lots.len() as f64)
    }

    /// Mark-to-midpoint value of every open lot.
    pub fn unrealized(&self, midpoint: f64) -> f64 {
        let long: f64 = self.longs.iter().map(|e| (midpoint - e) / e).sum();
        let short: f64 = self.shorts.iter().map(|e| (e - midpoint) / e).sum();
        long + short
    }

    pub fn total_pnl(&self, midpoint: f64) -> f64 {
        self.realized + self.unrealized(midpoint)
    }

    /// Executes one lot: `Bid` buys, `Ask` sells. An opposing open lot is
    /// closed first (oldest first); otherwise a new lot is opened. Returns the
    /// realized PnL of this execution.
    pub fn execute(&mut self, side: Side, price: f64, fee_rate: f64, step: usize) -> f64 {
        let fee = fee_rate * price * self.lot_size;
        self.fees += fee;
        let (closing, opening) = match side {
            Side::Bid => (&mut self.shorts, &mut self.longs),
            Side::Ask => (&mut self.longs, &mut self.shorts),
        };
        let pnl = match closing.pop_front() {
            Some(entry) => {
                let gross = match side {
                    Side::Bid => (entry - price) / entry,
                    Side::Ask => (price - entry) / entry,
                };
                let pnl = gross - fee / (entry * self.lot_size);
                self.closed.push(ClosedTrade { position: side.opposite(), entry, exit: price, fee, pnl, step });
                pnl
            }
            None => {
                opening.push_back(price);
                -fee / (price * self.lot_size)
            }
        };
        self.realized += pnl;
        pnl
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_netting_closes_oldest_lot() {
        let mut a = Account::new(1.0);
        a.execute(Side::Bid, 100.0, 0.0, 0);
        a.execute(Side::Bid, 101.0, 0.0, 1);
        let pnl = a.execute(Side::Ask, 102.0, 0.0, 2);
        assert!((pnl - 0.02).abs() < 1e-15);
        assert_eq!(a.inventory(), 1);
        assert_eq!(a.average_price(Side::Bid), Some(101.0));
        assert_eq!(a.closed_trades()[0].entry, 100.0);
    }

    #[test]
    fn short_round_trip() {
        let mut a = Account::new(2.0);
        a.execute(Side::Ask, 100.0, 0.0, 0);
        assert_eq!(a.inventory(), -1);
        assert!((a.unrealized(99.0) - 0.01).abs() < 1e-15);
        let pnl = a.execute(Side::Bid, 98.0, 0.0, 3);
        assert!((pnl - 0.02).abs() < 1e-15);
        assert_eq!(a.inventory(), 0);
        assert_eq!(a.unrealized(50.0), 0.0);
    }

    #[test]
    fn fee_is_charged_on_notional() {
        let mut a = Account::new(0.5);
        a.execute(Side::Bid, 200.0, 0.0, 0);
        let pnl = a.execute(Side::Ask, 200.0, 0.002, 1);
        assert!((a.fees() - 0.002 * 200.0 * 0.5).abs() < 1e-15);
        assert!((pnl + 0.002).abs() < 1e-15);
    }

    #[test]
    fn total_is_realized_plus_unrealized() {
        let mut a = Account::new(1.0);
        a.execute(Side::Bid, 100.0, 0.0, 0);
        a.execute(Side::Bid, 102.0, 0.0, 0);
        a.execute(Side::Ask, 103.0, 0.0, 0);
        let m = 101.0;
        assert_eq!(a.total_pnl(m), a.realized() + a.unrealized(m));
        assert!((a.total_pnl(m) - (0.03 + (101.0 - 102.0) / 102.0)).abs() < 1e-15);
    }
}
