//! Price-time priority limit order book rebuilt from an order event stream.
//!
//! Prices are integer tick counts so level keys compare exactly; the tick
//! size only enters when a monetary value is requested (midpoint, spread).
//! Both sides keep their levels in a `BTreeMap` keyed so that ascending
//! iteration starts at the best price: asks use the tick price, bids its
//! negation.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Price expressed as a whole number of ticks.
pub type Ticks = i64;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    /// +1 moving away from the inside on the ask side, -1 on the bid side.
    pub fn outward(self) -> Ticks {
        match self {
            Side::Bid => -1,
            Side::Ask => 1,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Limit,
    Cancel,
    Market,
}

/// One exchange message.
///
/// For `Market` events `side` is the aggressor: a `Bid` market order buys and
/// consumes ask liquidity, an `Ask` market order sells into the bids. The
/// price of a market event is ignored; fills are priced by the book.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEvent {
    pub kind: EventKind,
    pub side: Side,
    pub price: Ticks,
    pub quantity: f64,
    pub timestamp_ns: i64,
    pub order_id: OrderId,
}

impl OrderEvent {
    pub fn limit(side: Side, price: Ticks, quantity: f64, timestamp_ns: i64, id: u64) -> Self {
        Self { kind: EventKind::Limit, side, price, quantity, timestamp_ns, order_id: OrderId(id) }
    }

    pub fn cancel(side: Side, price: Ticks, quantity: f64, timestamp_ns: i64, id: u64) -> Self {
        Self { kind: EventKind::Cancel, side, price, quantity, timestamp_ns, order_id: OrderId(id) }
    }

    pub fn market(aggressor: Side, quantity: f64, timestamp_ns: i64) -> Self {
        Self {
            kind: EventKind::Market,
            side: aggressor,
            price: 0,
            quantity,
            timestamp_ns,
            order_id: OrderId(0),
        }
    }

    pub fn validate(&self) -> Result<(), BookError> {
        if !(self.quantity.is_finite() && self.quantity > 0.0) {
            return Err(BookError::InvalidEvent(format!("non-positive quantity {}", self.quantity)));
        }
        if self.kind != EventKind::Market && self.price <= 0 {
            return Err(BookError::InvalidEvent(format!("non-positive price {}", self.price)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BookError {
    #[error("unknown order {0}")]
    UnknownOrder(OrderId),
    #[error("order {0} is already live")]
    DuplicateOrder(OrderId),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("{0:?} side of the book is empty")]
    EmptySide(Side),
}

/// Liquidity removed from a resting order by an aggressive event.
#[derive(Clone, Debug, PartialEq)]
pub struct Fill {
    pub order_id: OrderId,
    /// Side the consumed liquidity rested on.
    pub side: Side,
    pub price: Ticks,
    pub quantity: f64,
    /// Rank of the level at the time it was consumed (0 = best).
    pub level: usize,
}

/// Liquidity added to or removed from a level by a limit or cancel event.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelChange {
    pub side: Side,
    pub price: Ticks,
    pub quantity: f64,
    /// Rank of the level (0 = best): after insertion for adds, before removal
    /// for cancels.
    pub level: usize,
}

/// What applying one event did to the book.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventOutcome {
    pub fills: Vec<Fill>,
    pub added: Option<LevelChange>,
    pub cancelled: Option<LevelChange>,
}

impl EventOutcome {
    pub fn filled_quantity(&self) -> f64 {
        self.fills.iter().map(|f| f.quantity).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceLevel {
    pub price: Ticks,
    total_quantity: f64,
    queue: VecDeque<(OrderId, f64)>,
}

impl PriceLevel {
    fn new(price: Ticks) -> Self {
        Self { price, total_quantity: 0.0, queue: VecDeque::new() }
    }

    pub fn total_quantity(&self) -> f64 {
        self.total_quantity
    }

    /// Resting orders in arrival order.
    pub fn orders(&self) -> impl Iterator<Item = &(OrderId, f64)> {
        self.queue.iter()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    // Summed in queue order so the total is reproducible from the queue alone.
    fn refresh_total(&mut self) {
        self.total_quantity = self.queue.iter().map(|(_, q)| q).sum();
    }
}

/// A price with the quantity resting there; padded entries carry 0.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthLevel {
    pub price: Ticks,
    pub quantity: f64,
}

#[derive(Clone, Debug, PartialEq)]
struct BookSide {
    side: Side,
    levels: BTreeMap<Ticks, PriceLevel>,
}

impl BookSide {
    fn new(side: Side) -> Self {
        Self { side, levels: BTreeMap::new() }
    }

    fn key(&self, price: Ticks) -> Ticks {
        match self.side {
            Side::Bid => -price,
            Side::Ask => price,
        }
    }

    fn best(&self) -> Option<Ticks> {
        self.levels.values().next().map(|l| l.price)
    }

    fn rank(&self, price: Ticks) -> usize {
        let key = self.key(price);
        self.levels.range(..key).count()
    }

    fn get(&self, price: Ticks) -> Option<&PriceLevel> {
        self.levels.get(&self.key(price))
    }
}

/// Full-depth order book with per-order FIFO queues.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderBook {
    tick_size: f64,
    bids: BookSide,
    asks: BookSide,
    index: HashMap<OrderId, (Side, Ticks)>,
    last_event_time: i64,
}

impl OrderBook {
    pub fn new(tick_size: f64) -> Self {
        Self {
            tick_size,
            bids: BookSide::new(Side::Bid),
            asks: BookSide::new(Side::Ask),
            index: HashMap::new(),
            last_event_time: 0,
        }
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn last_event_time(&self) -> i64 {
        self.last_event_time
    }

    fn book_side(&self, side: Side) -> &BookSide {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn book_side_mut(&mut self, side: Side) -> &mut BookSide {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    /// Applies one event. A rejected event leaves the book untouched.
    pub fn apply(&mut self, event: &OrderEvent) -> Result<EventOutcome, BookError> {
        event.validate()?;
        let outcome = match event.kind {
            EventKind::Limit => self.add_limit(event)?,
            EventKind::Cancel => self.cancel(event.order_id)?,
            EventKind::Market => {
                let mut outcome = EventOutcome::default();
                self.match_against(event.side.opposite(), event.quantity, None, &mut outcome.fills);
                outcome
            }
        };
        self.last_event_time = event.timestamp_ns;
        Ok(outcome)
    }

    fn add_limit(&mut self, event: &OrderEvent) -> Result<EventOutcome, BookError> {
        if self.index.contains_key(&event.order_id) {
            return Err(BookError::DuplicateOrder(event.order_id));
        }
        let mut outcome = EventOutcome::default();
        // A limit that crosses executes as marketable up to its limit price.
        let remaining = self.match_against(
            event.side.opposite(),
            event.quantity,
            Some(event.price),
            &mut outcome.fills,
        );
        if remaining > 0.0 {
            let side = self.book_side_mut(event.side);
            let key = side.key(event.price);
            let level = side.levels.entry(key).or_insert_with(|| PriceLevel::new(event.price));
            level.queue.push_back((event.order_id, remaining));
            level.refresh_total();
            let rank = side.rank(event.price);
            self.index.insert(event.order_id, (event.side, event.price));
            outcome.added = Some(LevelChange {
                side: event.side,
                price: event.price,
                quantity: remaining,
                level: rank,
            });
        }
        Ok(outcome)
    }

    fn cancel(&mut self, order_id: OrderId) -> Result<EventOutcome, BookError> {
        let Some(&(side, price)) = self.index.get(&order_id) else {
            log::warn!("cancel for unknown order {order_id} rejected");
            return Err(BookError::UnknownOrder(order_id));
        };
        let book_side = self.book_side_mut(side);
        let rank = book_side.rank(price);
        let key = book_side.key(price);
        let level = book_side.levels.get_mut(&key).expect("indexed order has a level");
        let pos = level
            .queue
            .iter()
            .position(|(id, _)| *id == order_id)
            .expect("indexed order is queued at its level");
        let (_, quantity) = level.queue.remove(pos).expect("position is in range");
        level.refresh_total();
        if level.queue.is_empty() {
            book_side.levels.remove(&key);
        }
        self.index.remove(&order_id);
        Ok(EventOutcome {
            cancelled: Some(LevelChange { side, price, quantity, level: rank }),
            ..EventOutcome::default()
        })
    }

    /// Consumes `contra` liquidity from the best price inward, FIFO within a
    /// level. With a limit price, stops at the first level that does not
    /// cross it. Returns the unfilled quantity.
    fn match_against(
        &mut self,
        contra: Side,
        mut quantity: f64,
        limit: Option<Ticks>,
        fills: &mut Vec<Fill>,
    ) -> f64 {
        let book_side = match contra {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        };
        while quantity > 0.0 {
            let Some(mut entry) = book_side.levels.first_entry() else {
                break;
            };
            let level = entry.get_mut();
            if let Some(limit) = limit {
                let crosses = match contra {
                    Side::Ask => level.price <= limit,
                    Side::Bid => level.price >= limit,
                };
                if !crosses {
                    break;
                }
            }
            while quantity > 0.0 {
                let Some(front) = level.queue.front_mut() else {
                    break;
                };
                let take = quantity.min(front.1);
                front.1 -= take;
                quantity -= take;
                fills.push(Fill {
                    order_id: front.0,
                    side: contra,
                    price: level.price,
                    quantity: take,
                    level: 0,
                });
                if front.1 == 0.0 {
                    let (id, _) = level.queue.pop_front().expect("front exists");
                    self.index.remove(&id);
                }
            }
            level.refresh_total();
            if level.queue.is_empty() {
                entry.remove();
            }
        }
        quantity
    }

    pub fn best_bid(&self) -> Option<Ticks> {
        self.bids.best()
    }

    pub fn best_ask(&self) -> Option<Ticks> {
        self.asks.best()
    }

    pub fn best(&self, side: Side) -> Option<Ticks> {
        self.book_side(side).best()
    }

    fn inside(&self) -> Result<(Ticks, Ticks), BookError> {
        let bid = self.best_bid().ok_or(BookError::EmptySide(Side::Bid))?;
        let ask = self.best_ask().ok_or(BookError::EmptySide(Side::Ask))?;
        Ok((bid, ask))
    }

    /// Mean of best bid and best ask, in quote currency.
    pub fn midpoint(&self) -> Result<f64, BookError> {
        let (bid, ask) = self.inside()?;
        Ok((bid + ask) as f64 / 2.0 * self.tick_size)
    }

    /// Best ask minus best bid, in quote currency.
    pub fn spread(&self) -> Result<f64, BookError> {
        let (bid, ask) = self.inside()?;
        Ok((ask - bid) as f64 * self.tick_size)
    }

    /// The best `n_levels` occupied levels of `side`, best first.
    ///
    /// Missing levels are padded with zero quantity at prices stepping one
    /// tick further out from the last real level. An empty side is anchored
    /// at the opposite best price (or 0 on an empty book).
    pub fn depth(&self, side: Side, n_levels: usize) -> Vec<DepthLevel> {
        let mut out = Vec::with_capacity(n_levels);
        self.depth_into(side, n_levels, &mut out);
        out
    }

    pub fn depth_into(&self, side: Side, n_levels: usize, out: &mut Vec<DepthLevel>) {
        out.clear();
        out.extend(
            self.book_side(side)
                .levels
                .values()
                .take(n_levels)
                .map(|l| DepthLevel { price: l.price, quantity: l.total_quantity }),
        );
        let mut anchor = match out.last() {
            Some(l) => l.price,
            None => self.best(side.opposite()).unwrap_or(0),
        };
        while out.len() < n_levels {
            anchor += side.outward();
            out.push(DepthLevel { price: anchor, quantity: 0.0 });
        }
    }

    /// Quantity resting ahead of `order_id` in its level's queue.
    pub fn queue_ahead(&self, side: Side, price: Ticks, order_id: OrderId) -> Result<f64, BookError> {
        let level = self.book_side(side).get(price).ok_or(BookError::UnknownOrder(order_id))?;
        let mut ahead = 0.0;
        for (id, q) in &level.queue {
            if *id == order_id {
                return Ok(ahead);
            }
            ahead += q;
        }
        Err(BookError::UnknownOrder(order_id))
    }

    pub fn level(&self, side: Side, price: Ticks) -> Option<&PriceLevel> {
        self.book_side(side).get(price)
    }

    pub fn level_quantity(&self, side: Side, price: Ticks) -> f64 {
        self.level(side, price).map_or(0.0, |l| l.total_quantity)
    }

    /// Levels of one side, best first.
    pub fn levels(&self, side: Side) -> impl Iterator<Item = &PriceLevel> {
        self.book_side(side).levels.values()
    }

    pub fn contains(&self, order_id: OrderId) -> bool {
        self.index.contains_key(&order_id)
    }

    pub fn order_count(&self) -> usize {
        self.index.len()
    }

    pub fn total_quantity(&self, side: Side) -> f64 {
        self.levels(side).map(|l| l.total_quantity).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn book() -> OrderBook {
        OrderBook::new(1.0)
    }

    #[test]
    fn limit_on_empty_book_creates_level() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 2.0, 1, 1)).unwrap();
        assert_eq!(b.depth(Side::Bid, 1), vec![DepthLevel { price: 100, quantity: 2.0 }]);
        assert_eq!(b.best_ask(), None);
    }

    #[test]
    fn market_partially_consumes_level() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 2.0, 1, 1)).unwrap();
        let out = b.apply(&OrderEvent::market(Side::Ask, 0.5, 2)).unwrap();
        assert_eq!(out.fills.len(), 1);
        assert_eq!((out.fills[0].price, out.fills[0].quantity), (100, 0.5));
        assert_eq!(b.level_quantity(Side::Bid, 100), 1.5);
    }

    #[test]
    fn market_walks_fifo_queue() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 1.0, 1, 10)).unwrap();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 2.0, 2, 11)).unwrap();
        let out = b.apply(&OrderEvent::market(Side::Ask, 2.5, 3)).unwrap();
        let fills: Vec<_> = out.fills.iter().map(|f| (f.order_id.0, f.quantity)).collect();
        assert_eq!(fills, vec![(10, 1.0), (11, 1.5)]);
        assert!(!b.contains(OrderId(10)));
        assert_eq!(b.level_quantity(Side::Bid, 100), 0.5);
    }

    #[test]
    fn market_stops_when_side_empties() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Ask, 101, 1.0, 1, 1)).unwrap();
        let out = b.apply(&OrderEvent::market(Side::Bid, 5.0, 2)).unwrap();
        assert_eq!(out.filled_quantity(), 1.0);
        assert_eq!(b.best_ask(), None);
    }

    #[test]
    fn crossing_limit_matches_then_rests() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Ask, 101, 1.0, 1, 1)).unwrap();
        b.apply(&OrderEvent::limit(Side::Ask, 103, 1.0, 2, 2)).unwrap();
        let out = b.apply(&OrderEvent::limit(Side::Bid, 102, 3.0, 3, 3)).unwrap();
        assert_eq!(out.filled_quantity(), 1.0);
        assert_eq!(out.added.as_ref().unwrap().quantity, 2.0);
        assert_eq!(b.best_bid(), Some(102));
        assert_eq!(b.best_ask(), Some(103));
    }

    #[test]
    fn unknown_cancel_leaves_book_unchanged() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 1.0, 1, 1)).unwrap();
        let before = b.clone();
        let err = b.apply(&OrderEvent::cancel(Side::Bid, 100, 1.0, 2, 99)).unwrap_err();
        assert_eq!(err, BookError::UnknownOrder(OrderId(99)));
        assert_eq!(b, before);
    }

    #[test]
    fn duplicate_and_malformed_events_rejected() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 1.0, 1, 1)).unwrap();
        assert!(matches!(
            b.apply(&OrderEvent::limit(Side::Bid, 99, 1.0, 2, 1)),
            Err(BookError::DuplicateOrder(_))
        ));
        assert!(matches!(
            b.apply(&OrderEvent::limit(Side::Bid, 99, 0.0, 2, 2)),
            Err(BookError::InvalidEvent(_))
        ));
        assert!(matches!(
            b.apply(&OrderEvent::limit(Side::Bid, 0, 1.0, 2, 3)),
            Err(BookError::InvalidEvent(_))
        ));
    }

    #[test]
    fn midpoint_and_spread() {
        let mut b = book();
        assert_eq!(b.midpoint(), Err(BookError::EmptySide(Side::Bid)));
        b.apply(&OrderEvent::limit(Side::Bid, 100, 1.0, 1, 1)).unwrap();
        assert_eq!(b.midpoint(), Err(BookError::EmptySide(Side::Ask)));
        assert_eq!(b.spread(), Err(BookError::EmptySide(Side::Ask)));
        b.apply(&OrderEvent::limit(Side::Ask, 102, 1.0, 2, 2)).unwrap();
        assert_eq!(b.midpoint().unwrap(), 101.0);
        assert_eq!(b.spread().unwrap(), 2.0);

        let mut fine = OrderBook::new(0.1);
        fine.apply(&OrderEvent::limit(Side::Bid, 94005, 1.0, 1, 1)).unwrap();
        fine.apply(&OrderEvent::limit(Side::Ask, 94006, 1.0, 2, 2)).unwrap();
        assert!((fine.midpoint().unwrap() - 9400.55).abs() < 1e-9);
        assert!((fine.spread().unwrap() - 0.1).abs() < 1e-12);

        let mut cents = OrderBook::new(0.01);
        cents.apply(&OrderEvent::limit(Side::Bid, 10000, 1.0, 1, 1)).unwrap();
        cents.apply(&OrderEvent::limit(Side::Ask, 10001, 1.0, 2, 2)).unwrap();
        assert!((cents.spread().unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn locked_book_has_zero_spread() {
        // Replay never leaves a locked book (equal prices match), so the state
        // is assembled directly.
        let mut b = book();
        for (side, id) in [(Side::Bid, 1), (Side::Ask, 2)] {
            let book_side = b.book_side_mut(side);
            let key = book_side.key(100);
            let mut level = PriceLevel::new(100);
            level.queue.push_back((OrderId(id), 1.0));
            level.refresh_total();
            book_side.levels.insert(key, level);
        }
        assert_eq!(b.spread().unwrap(), 0.0);
        assert_eq!(b.midpoint().unwrap(), 100.0);
    }

    #[test]
    fn depth_pads_thin_and_empty_sides() {
        let mut b = book();
        for (i, p) in [100, 99, 97].iter().enumerate() {
            b.apply(&OrderEvent::limit(Side::Bid, *p, 1.0, i as i64, i as u64 + 1)).unwrap();
        }
        let d = b.depth(Side::Bid, 15);
        assert_eq!(d.len(), 15);
        assert_eq!(d[..3].iter().map(|l| l.price).collect::<Vec<_>>(), vec![100, 99, 97]);
        assert_eq!(d[3], DepthLevel { price: 96, quantity: 0.0 });
        assert_eq!(d[14], DepthLevel { price: 85, quantity: 0.0 });
        assert_eq!(b.depth(Side::Bid, 1), vec![DepthLevel { price: 100, quantity: 1.0 }]);

        let asks = b.depth(Side::Ask, 2);
        assert_eq!(asks, vec![DepthLevel { price: 101, quantity: 0.0 }, DepthLevel { price: 102, quantity: 0.0 }]);
    }

    #[test]
    fn queue_ahead_tracks_consumption() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 0.5, 1, 7)).unwrap();
        assert_eq!(b.queue_ahead(Side::Bid, 100, OrderId(7)).unwrap(), 0.0);

        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 1.0, 1, 1)).unwrap();
        b.apply(&OrderEvent::limit(Side::Bid, 100, 0.5, 2, 7)).unwrap();
        assert_eq!(b.queue_ahead(Side::Bid, 100, OrderId(7)).unwrap(), 1.0);
        b.apply(&OrderEvent::market(Side::Ask, 0.4, 3)).unwrap();
        assert!((b.queue_ahead(Side::Bid, 100, OrderId(7)).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(b.queue_ahead(Side::Bid, 100, OrderId(8)), Err(BookError::UnknownOrder(OrderId(8))));
    }

    #[test]
    fn level_ranks_reported() {
        let mut b = book();
        b.apply(&OrderEvent::limit(Side::Ask, 105, 1.0, 1, 1)).unwrap();
        let out = b.apply(&OrderEvent::limit(Side::Ask, 103, 1.0, 2, 2)).unwrap();
        assert_eq!(out.added.unwrap().level, 0);
        let out = b.apply(&OrderEvent::limit(Side::Ask, 106, 1.0, 3, 3)).unwrap();
        assert_eq!(out.added.unwrap().level, 2);
        let out = b.apply(&OrderEvent::cancel(Side::Ask, 105, 1.0, 4, 1)).unwrap();
        assert_eq!(out.cancelled.unwrap().level, 1);
    }
}
