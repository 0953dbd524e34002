//! Agent actions, resting agent orders and the queue-based fill model.

use serde::{Deserialize, Serialize};

use crate::lob::{DepthLevel, Side, Ticks};
use crate::pipeline::TradePrint;

pub const N_ACTIONS: usize = 17;

/// Bid and ask ladder levels for actions 2 through 16.
const QUOTE_LEVELS: [(usize, usize); 15] = [
    (0, 4),
    (0, 9),
    (0, 14),
    (4, 0),
    (4, 4),
    (4, 9),
    (4, 14),
    (9, 0),
    (9, 4),
    (9, 9),
    (9, 14),
    (14, 0),
    (14, 4),
    (14, 9),
    (14, 14),
];

/// Action identifier in `1..=17`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionId(u8);

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Action {
    NoAction,
    Quote { bid_level: usize, ask_level: usize },
    Flatten,
}

impl ActionId {
    pub const NO_ACTION: ActionId = ActionId(1);
    pub const FLATTEN: ActionId = ActionId(17);

    pub fn new(id: u8) -> Option<Self> {
        (1..=N_ACTIONS as u8).contains(&id).then_some(ActionId(id))
    }

    /// Maps a zero-based policy output index to an action.
    pub fn from_index(index: usize) -> Option<Self> {
        u8::try_from(index + 1).ok().and_then(Self::new)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn action(self) -> Action {
        match self.0 {
            1 => Action::NoAction,
            17 => Action::Flatten,
            id => {
                let (bid_level, ask_level) = QUOTE_LEVELS[id as usize - 2];
                Action::Quote { bid_level, ask_level }
            }
        }
    }
}

/// The agent's single resting order on one side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentOrder {
    pub side: Side,
    pub price: Ticks,
    pub size: f64,
    pub remaining: f64,
    pub queue_ahead: f64,
    /// Sum of price * quantity over partial executions, in ticks.
    pub executed_notional: f64,
}

impl AgentOrder {
    pub fn new(side: Side, price: Ticks, size: f64, queue_ahead: f64) -> Self {
        Self { side, price, size, remaining: size, queue_ahead, executed_notional: 0.0 }
    }

    pub fn executed(&self) -> f64 {
        self.size - self.remaining
    }

    pub fn is_filled(&self) -> bool {
        self.remaining == 0.0
    }

    /// Volume-weighted execution price in ticks.
    pub fn average_fill_price(&self) -> Option<f64> {
        let ex = self.executed();
        (ex > 0.0).then(|| self.executed_notional / ex)
    }

    fn take(&mut self, quantity: f64) -> f64 {
        let q = quantity.min(self.remaining);
        self.remaining -= q;
        self.executed_notional += q * self.price as f64;
        q
    }
}

/// Price and queue position for a new order at ladder level `level`.
///
/// Joining an occupied level first tries to step one tick toward the inside
/// when that price holds no liquidity on either side; the order then leads
/// its own level. Otherwise it joins the tail of the level.
pub fn placement(side: Side, level: usize, own: &[DepthLevel], contra: &[DepthLevel]) -> (Ticks, f64) {
    let target = own[level.min(own.len() - 1)];
    if target.quantity <= 0.0 {
        return (target.price, 0.0);
    }
    let improved = target.price - side.outward();
    let occupied_own = own.iter().any(|l| l.price == improved && l.quantity > 0.0);
    let crosses = match contra.iter().find(|l| l.quantity > 0.0) {
        Some(best) => match side {
            Side::Bid => improved >= best.price,
            Side::Ask => improved <= best.price,
        },
        None => false,
    };
    if occupied_own || crosses {
        (target.price, target.quantity)
    } else {
        (improved, 0.0)
    }
}

/// Runs the interval's trades against a resting agent order and returns the
/// quantity filled. Trades at the order's price consume the queue ahead first
/// and fill the order from what is left; a trade printing through the price
/// fills the remainder outright.
pub fn simulate_fills(order: &mut AgentOrder, trades: &[TradePrint]) -> f64 {
    let mut filled = 0.0;
    let side = order.side;
    for trade in trades.iter().filter(|t| t.resting_side == side) {
        if order.is_filled() {
            break;
        }
        let through = match order.side {
            Side::Bid => trade.price < order.price,
            Side::Ask => trade.price > order.price,
        };
        if through {
            filled += order.take(order.remaining);
        } else if trade.price == order.price {
            let ahead = trade.quantity.min(order.queue_ahead);
            order.queue_ahead -= ahead;
            filled += order.take(trade.quantity - ahead);
        }
    }
    filled
}

/// Caps the queue ahead by what is still resting at the order's price.
/// Prices inside the visible ladder with no level have nothing ahead.
pub fn refresh_queue(order: &mut AgentOrder, ladder: &[DepthLevel]) {
    if let Some(level) = ladder.iter().find(|l| l.price == order.price) {
        order.queue_ahead = order.queue_ahead.min(level.quantity);
    } else if let Some(last) = ladder.iter().rev().find(|l| l.quantity > 0.0) {
        let within = match order.side {
            Side::Bid => order.price > last.price,
            Side::Ask => order.price < last.price,
        };
        if within {
            order.queue_ahead = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(side: Side, levels: &[(Ticks, f64)]) -> Vec<DepthLevel> {
        let mut out: Vec<DepthLevel> = levels.iter().map(|&(price, quantity)| DepthLevel { price, quantity }).collect();
        let mut p = out.last().map(|l| l.price).unwrap_or(100);
        while out.len() < 15 {
            p += side.outward();
            out.push(DepthLevel { price: p, quantity: 0.0 });
        }
        out
    }

    fn print(side: Side, price: Ticks, quantity: f64) -> TradePrint {
        TradePrint { resting_side: side, price, quantity }
    }

    #[test]
    fn action_table_matches_layout() {
        assert_eq!(ActionId::new(6).unwrap().action(), Action::Quote { bid_level: 4, ask_level: 4 });
        assert_eq!(ActionId::new(2).unwrap().action(), Action::Quote { bid_level: 0, ask_level: 4 });
        assert_eq!(ActionId::new(16).unwrap().action(), Action::Quote { bid_level: 14, ask_level: 14 });
        assert_eq!(ActionId::new(9).unwrap().action(), Action::Quote { bid_level: 9, ask_level: 0 });
        assert_eq!(ActionId::new(1).unwrap().action(), Action::NoAction);
        assert_eq!(ActionId::new(17).unwrap().action(), Action::Flatten);
        assert_eq!(ActionId::new(0), None);
        assert_eq!(ActionId::new(18), None);
        assert_eq!(ActionId::from_index(16), Some(ActionId::FLATTEN));
        assert_eq!(ActionId::from_index(17), None);
    }

    #[test]
    fn queue_depletes_before_fill() {
        let mut o = AgentOrder::new(Side::Bid, 100, 1.0, 1.0);
        assert_eq!(simulate_fills(&mut o, &[print(Side::Bid, 100, 0.8)]), 0.0);
        assert!((o.queue_ahead - 0.2).abs() < 1e-15);
        assert_eq!(o.executed(), 0.0);

        let mut o = AgentOrder::new(Side::Bid, 100, 1.0, 0.0);
        assert_eq!(simulate_fills(&mut o, &[print(Side::Bid, 100, 1.5)]), 1.0);
        assert!(o.is_filled());
    }

    #[test]
    fn partial_fill_then_print_through() {
        let mut o = AgentOrder::new(Side::Ask, 105, 1.0, 0.5);
        let filled = simulate_fills(&mut o, &[print(Side::Ask, 105, 0.75)]);
        assert_eq!(filled, 0.25);
        assert_eq!(o.queue_ahead, 0.0);
        let filled = simulate_fills(&mut o, &[print(Side::Ask, 106, 0.01)]);
        assert_eq!(filled, 0.75);
        assert!(o.is_filled());
        assert_eq!(o.average_fill_price(), Some(105.0));
    }

    #[test]
    fn other_side_and_better_prices_ignored() {
        let mut o = AgentOrder::new(Side::Bid, 100, 1.0, 0.0);
        let filled = simulate_fills(&mut o, &[print(Side::Ask, 99, 5.0), print(Side::Bid, 101, 5.0)]);
        assert_eq!(filled, 0.0);
    }

    #[test]
    fn placement_jumps_ahead_into_empty_tick() {
        let bids = ladder(Side::Bid, &[(100, 2.0), (98, 1.0)]);
        let asks = ladder(Side::Ask, &[(103, 1.0)]);
        // Inside: 101 is empty and below the ask.
        assert_eq!(placement(Side::Bid, 0, &bids, &asks), (101, 0.0));
        // Level 1 at 98: 99 is empty.
        assert_eq!(placement(Side::Bid, 1, &bids, &asks), (99, 0.0));
        // Padded level: no liquidity, no queue.
        assert_eq!(placement(Side::Bid, 4, &bids, &asks), (bids[4].price, 0.0));

        let tight_asks = ladder(Side::Ask, &[(101, 1.0)]);
        assert_eq!(placement(Side::Bid, 0, &bids, &tight_asks), (100, 2.0));
        let dense = ladder(Side::Bid, &[(100, 2.0), (99, 3.0)]);
        assert_eq!(placement(Side::Bid, 1, &dense, &asks), (99, 3.0));
        assert_eq!(placement(Side::Ask, 0, &asks, &bids), (102, 0.0));
    }

    #[test]
    fn queue_refresh_caps_at_resting_quantity() {
        let bids = ladder(Side::Bid, &[(100, 2.0), (98, 0.4), (95, 1.0)]);
        let mut o = AgentOrder::new(Side::Bid, 98, 1.0, 1.5);
        refresh_queue(&mut o, &bids);
        assert_eq!(o.queue_ahead, 0.4);
        let mut gap = AgentOrder::new(Side::Bid, 97, 1.0, 1.5);
        refresh_queue(&mut gap, &bids);
        assert_eq!(gap.queue_ahead, 0.0);
        let mut deep = AgentOrder::new(Side::Bid, 80, 1.0, 1.5);
        refresh_queue(&mut deep, &bids);
        assert_eq!(deep.queue_ahead, 1.5);
    }
}
