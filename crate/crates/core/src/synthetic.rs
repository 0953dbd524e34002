//! Synthetic tick days for tests, demos and smoke runs.
//!
//! The fair value follows a discretised Ornstein-Uhlenbeck process in ticks.
//! Order flow is symmetric around it: limit orders rest a few ticks either
//! side of fair value, market orders pick a side at random and cancels prune
//! the oldest resting orders. When the fair value moves, newly posted orders
//! cross stale quotes and execute, which drags the book along.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::lob::{OrderBook, OrderEvent, OrderId, Side, Ticks};
use crate::pipeline::{TickFile, TickHeader, NANOS_PER_SECOND, TICK_FORMAT_VERSION};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub instrument: String,
    pub date: String,
    pub tick_size: f64,
    pub seconds: usize,
    pub start_ns: i64,
    /// Long-run fair value in ticks.
    pub mean_ticks: f64,
    /// Fraction of the gap to the mean closed per second.
    pub reversion: f64,
    /// Fair value noise in ticks per second.
    pub volatility: f64,
    pub events_per_second: usize,
    /// Mean distance of new limit orders from fair value, in ticks.
    pub mean_offset: f64,
    pub market_share: f64,
    pub cancel_share: f64,
    pub max_resting_orders: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            instrument: "SYN-USD".into(),
            date: "2024-01-01".into(),
            tick_size: 0.01,
            seconds: 3_600,
            start_ns: 1_704_067_200 * NANOS_PER_SECOND,
            mean_ticks: 10_000.0,
            reversion: 0.05,
            volatility: 1.5,
            events_per_second: 12,
            mean_offset: 3.0,
            market_share: 0.12,
            cancel_share: 0.3,
            max_resting_orders: 300,
            seed: 7,
        }
    }
}

/// Generates one day of events. The output always replays cleanly: cancels
/// only reference orders that are still resting.
pub fn generate(config: &SyntheticConfig) -> TickFile {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.volatility.max(0.0)).expect("finite volatility");
    let offset = Exp::new(1.0 / config.mean_offset.max(1e-3)).expect("positive rate");
    let size = Exp::new(1.0).expect("positive rate");

    let mut book = OrderBook::new(config.tick_size);
    let mut resting: VecDeque<(OrderId, Side, Ticks)> = VecDeque::new();
    let mut events = Vec::with_capacity(config.seconds * config.events_per_second + 64);
    let mut next_id = 1u64;
    let mut fair = config.mean_ticks;

    let push = |event: OrderEvent, book: &mut OrderBook, resting: &mut VecDeque<_>, events: &mut Vec<_>| {
        if book.apply(&event).is_ok() {
            if book.contains(event.order_id) {
                resting.push_back((event.order_id, event.side, event.price));
            }
            events.push(event);
        }
    };

    // Seed both sides so the first snapshot is two-sided.
    let anchor = fair.round() as Ticks;
    for k in 1..=10 {
        for side in [Side::Bid, Side::Ask] {
            let price = anchor + side.outward() * k;
            let qty = round_qty(0.5 + size.sample(&mut rng));
            push(OrderEvent::limit(side, price, qty, config.start_ns, next_id), &mut book, &mut resting, &mut events);
            next_id += 1;
        }
    }

    let n = config.events_per_second.max(1);
    let spacing = NANOS_PER_SECOND / (n as i64 + 1);
    for sec in 0..config.seconds {
        fair += config.reversion * (config.mean_ticks - fair) + noise.sample(&mut rng);
        let base = config.start_ns + sec as i64 * NANOS_PER_SECOND;
        for k in 0..n {
            let ts = base + (k as i64 + 1) * spacing;
            let u: f64 = rng.random();
            if u < config.market_share {
                let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
                let qty = round_qty(0.05 + 0.8 * size.sample(&mut rng));
                push(OrderEvent::market(side, qty, ts), &mut book, &mut resting, &mut events);
            } else if u < config.market_share + config.cancel_share || resting.len() > config.max_resting_orders {
                // Oldest live order goes first; filled ones are discarded lazily.
                while let Some((id, side, price)) = resting.pop_front() {
                    if book.contains(id) {
                        let qty = book.level(side, price).and_then(|l| l.orders().find(|o| o.0 == id)).map(|o| o.1);
                        if let Some(qty) = qty {
                            push(OrderEvent::cancel(side, price, qty, ts, id.0), &mut book, &mut resting, &mut events);
                        }
                        break;
                    }
                }
            } else {
                let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
                let dist = 1 + offset.sample(&mut rng).floor() as Ticks;
                let price = (fair.round() as Ticks + side.outward() * dist).max(1);
                let qty = round_qty(0.05 + size.sample(&mut rng));
                push(OrderEvent::limit(side, price, qty, ts, next_id), &mut book, &mut resting, &mut events);
                next_id += 1;
            }
        }
    }

    TickFile {
        header: TickHeader {
            instrument: config.instrument.clone(),
            tick_size: config.tick_size,
            date: config.date.clone(),
            version: TICK_FORMAT_VERSION,
        },
        events,
    }
}

fn round_qty(q: f64) -> f64 {
    (q * 100.0).round().max(1.0) / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{replay, ReplayConfig};

    #[test]
    fn generated_day_replays_cleanly() {
        let cfg = SyntheticConfig { seconds: 120, ..Default::default() };
        let ticks = generate(&cfg);
        let (day, stats) = replay(&ticks, &ReplayConfig::default()).unwrap();
        assert_eq!(stats.rejected, 0);
        assert_eq!(day.len(), 120);
        assert!(stats.market_events > 0 && stats.cancel_events > 0);
        assert!(ticks.events.windows(2).all(|w| w[0].timestamp_ns <= w[1].timestamp_ns));
    }

    #[test]
    fn same_seed_same_day() {
        let cfg = SyntheticConfig { seconds: 30, ..Default::default() };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = SyntheticConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate(&cfg), generate(&other));
    }

    #[test]
    fn midpoint_reverts_toward_mean() {
        let cfg = SyntheticConfig { seconds: 1_800, ..Default::default() };
        let (day, _) = replay(&generate(&cfg), &ReplayConfig::default()).unwrap();
        let mean = cfg.mean_ticks * cfg.tick_size;
        let avg: f64 = day.dataset.rows.iter().map(|r| r.midpoint).sum::<f64>() / day.len() as f64;
        assert!((avg / mean - 1.0).abs() < 0.01, "average midpoint {avg} far from {mean}");
    }
}
