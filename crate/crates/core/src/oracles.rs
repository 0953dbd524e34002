//! Slow reference implementations used to cross-check the fast paths in
//! tests. Enabled by the `oracles` feature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionId, EnvConfig, MarketMakingEnv, PreparedDay, RewardKind};
use crate::features::{NormalizerStats, ESS_WIDTH, LEVELS};
use crate::lob::{BookError, DepthLevel, EventKind, OrderBook, OrderEvent, OrderId, Side, Ticks};
use crate::pipeline::{MarketDay, MarketStep, SnapshotDataset, SnapshotRow, TradePrint};

/// Per-level view of one side: price and the queue in arrival order, best
/// price first.
pub type SideView = Vec<(Ticks, Vec<(OrderId, f64)>)>;

#[derive(Clone, Debug)]
struct NaiveOrder {
    id: OrderId,
    side: Side,
    price: Ticks,
    quantity: f64,
    seq: u64,
}

/// Order book kept as a flat list of resting orders. Matching scans the
/// whole list for the best contra order each time, and level views are
/// rebuilt from scratch on request.
#[derive(Clone, Debug, Default)]
pub struct NaiveBook {
    orders: Vec<NaiveOrder>,
    seq: u64,
}

impl NaiveBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies an event and returns the fills as (resting id, price, qty).
    pub fn apply(&mut self, event: &OrderEvent) -> Result<Vec<(OrderId, Ticks, f64)>, BookError> {
        event.validate()?;
        match event.kind {
            EventKind::Cancel => {
                let pos = self
                    .orders
                    .iter()
                    .position(|o| o.id == event.order_id)
                    .ok_or(BookError::UnknownOrder(event.order_id))?;
                self.orders.remove(pos);
                Ok(Vec::new())
            }
            EventKind::Market => Ok(self.sweep(event.side.opposite(), event.quantity, None).0),
            EventKind::Limit => {
                if self.orders.iter().any(|o| o.id == event.order_id) {
                    return Err(BookError::DuplicateOrder(event.order_id));
                }
                let (fills, left) = self.sweep(event.side.opposite(), event.quantity, Some(event.price));
                if left > 0.0 {
                    self.seq += 1;
                    self.orders.push(NaiveOrder {
                        id: event.order_id,
                        side: event.side,
                        price: event.price,
                        quantity: left,
                        seq: self.seq,
                    });
                }
                Ok(fills)
            }
        }
    }

    fn best_index(&self, side: Side, limit: Option<Ticks>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, o) in self.orders.iter().enumerate() {
            if o.side != side {
                continue;
            }
            if let Some(limit) = limit {
                let ok = match side {
                    Side::Ask => o.price <= limit,
                    Side::Bid => o.price >= limit,
                };
                if !ok {
                    continue;
                }
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let cur = &self.orders[b];
                    let price_better = match side {
                        Side::Ask => o.price < cur.price,
                        Side::Bid => o.price > cur.price,
                    };
                    price_better || (o.price == cur.price && o.seq < cur.seq)
                }
            };
            if better {
                best = Some(i);
            }
        }
        best
    }

    fn sweep(&mut self, contra: Side, mut quantity: f64, limit: Option<Ticks>) -> (Vec<(OrderId, Ticks, f64)>, f64) {
        let mut fills = Vec::new();
        while quantity > 0.0 {
            let Some(i) = self.best_index(contra, limit) else { break };
            let o = &mut self.orders[i];
            let take = quantity.min(o.quantity);
            o.quantity -= take;
            quantity -= take;
            fills.push((o.id, o.price, take));
            if o.quantity == 0.0 {
                self.orders.remove(i);
            }
        }
        (fills, quantity)
    }

    pub fn view(&self, side: Side) -> SideView {
        let mut orders: Vec<&NaiveOrder> = self.orders.iter().filter(|o| o.side == side).collect();
        orders.sort_by(|a, b| {
            let by_price = match side {
                Side::Bid => b.price.cmp(&a.price),
                Side::Ask => a.price.cmp(&b.price),
            };
            by_price.then(a.seq.cmp(&b.seq))
        });
        let mut out: SideView = Vec::new();
        for o in orders {
            match out.last_mut() {
                Some((p, q)) if *p == o.price => q.push((o.id, o.quantity)),
                _ => out.push((o.price, vec![(o.id, o.quantity)])),
            }
        }
        out
    }

    /// Level totals summed in queue order.
    pub fn totals(&self, side: Side) -> Vec<(Ticks, f64)> {
        self.view(side).into_iter().map(|(p, q)| (p, q.iter().map(|(_, x)| x).sum())).collect()
    }
}

/// The engine's book in the same shape as [`NaiveBook::view`].
pub fn engine_view(book: &OrderBook, side: Side) -> SideView {
    book.levels(side).map(|l| (l.price, l.orders().copied().collect())).collect()
}

pub fn engine_totals(book: &OrderBook, side: Side) -> Vec<(Ticks, f64)> {
    book.levels(side).map(|l| (l.price, l.total_quantity())).collect()
}

/// Random event stream over a narrow price band so limits often cross.
/// About one cancel in twenty names an order that is not resting.
pub fn random_events(seed: u64, n: usize) -> Vec<OrderEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut live: Vec<(u64, Side, Ticks)> = Vec::new();
    let mut next_id = 1u64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let ts = i as i64;
        let qty = rng.random_range(1..=300) as f64 / 100.0;
        let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
        let u: f64 = rng.random();
        if u < 0.55 || live.is_empty() {
            let price = rng.random_range(95..=105);
            out.push(OrderEvent::limit(side, price, qty, ts, next_id));
            live.push((next_id, side, price));
            next_id += 1;
        } else if u < 0.8 {
            if rng.random_bool(0.05) {
                out.push(OrderEvent::cancel(side, 100, 1.0, ts, next_id + 1_000_000));
            } else {
                let (id, side, price) = live.swap_remove(rng.random_range(0..live.len()));
                out.push(OrderEvent::cancel(side, price, 1.0, ts, id));
            }
        } else {
            out.push(OrderEvent::market(side, qty, ts));
        }
    }
    out
}

/// Applies `events` to the engine and the naive book, comparing outcomes,
/// full queues and level totals after every event.
pub fn check_book_equivalence(events: &[OrderEvent]) -> Result<(), String> {
    let mut engine = OrderBook::new(1.0);
    let mut naive = NaiveBook::new();
    for (i, event) in events.iter().enumerate() {
        let a = engine.apply(event);
        let b = naive.apply(event);
        match (&a, &b) {
            (Ok(out), Ok(fills)) => {
                let got: Vec<_> = out.fills.iter().map(|f| (f.order_id, f.price, f.quantity)).collect();
                if &got != fills {
                    return Err(format!("event {i}: fills {got:?} vs {fills:?}"));
                }
            }
            (Err(x), Err(y)) if x == y => {}
            _ => return Err(format!("event {i}: outcome {a:?} vs {b:?}")),
        }
        for side in [Side::Bid, Side::Ask] {
            if engine_view(&engine, side) != naive.view(side) {
                return Err(format!("event {i}: {side:?} queues differ"));
            }
            if engine_totals(&engine, side) != naive.totals(side) {
                return Err(format!("event {i}: {side:?} level totals differ"));
            }
        }
    }
    Ok(())
}

/// One lot execution recorded for the ledger oracle.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LedgerTrade {
    /// `Bid` buys, `Ask` sells.
    pub side: Side,
    pub price: f64,
    pub fee_rate: f64,
}

/// Recomputes PnL from the full list of executions. With one-lot trades,
/// FIFO netting pairs the i-th buy with the i-th sell; whichever came
/// first is the entry. Both fees of a pair are charged against its entry
/// notional; unpaired lots are marked to the midpoint.
pub fn ledger_pnl(trades: &[LedgerTrade], lot_size: f64, midpoint: f64) -> (f64, f64) {
    let buys: Vec<(usize, &LedgerTrade)> = trades.iter().enumerate().filter(|(_, t)| t.side == Side::Bid).collect();
    let sells: Vec<(usize, &LedgerTrade)> = trades.iter().enumerate().filter(|(_, t)| t.side == Side::Ask).collect();
    let paired = buys.len().min(sells.len());
    let fee = |t: &LedgerTrade| t.fee_rate * t.price * lot_size;
    let mut realized = 0.0;
    for i in 0..paired {
        let (bi, b) = buys[i];
        let (si, s) = sells[i];
        let (entry, gross) = if bi < si {
            (b.price, (s.price - b.price) / b.price)
        } else {
            (s.price, (s.price - b.price) / s.price)
        };
        realized += gross - (fee(b) + fee(s)) / (entry * lot_size);
    }
    let mut unrealized = 0.0;
    for (_, b) in &buys[paired..] {
        realized -= fee(b) / (b.price * lot_size);
        unrealized += (midpoint - b.price) / b.price;
    }
    for (_, s) in &sells[paired..] {
        realized -= fee(s) / (s.price * lot_size);
        unrealized += (s.price - midpoint) / s.price;
    }
    (realized, unrealized)
}

/// Random two-sided market day with `steps` snapshots. Ladders have random
/// gaps and sizes; each interval prints a few trades near the inside.
pub fn random_market_day(seed: u64, steps: usize, tick_size: f64) -> MarketDay {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mid: Ticks = 1_000;
    let mut rows = Vec::with_capacity(steps);
    let mut market = Vec::with_capacity(steps);
    for t in 0..steps {
        mid = (mid + rng.random_range(-2..=2)).max(50);
        let half = rng.random_range(1..=3);
        let ladder = |rng: &mut ChaCha8Rng, side: Side, best: Ticks| {
            let mut price = best;
            let mut out = Vec::with_capacity(LEVELS);
            for _ in 0..LEVELS {
                out.push(DepthLevel { price, quantity: (rng.random_range(1..=40) as f64) * 0.25 });
                price += side.outward() * rng.random_range(1..=2);
            }
            out
        };
        let bids = ladder(&mut rng, Side::Bid, mid - half);
        let asks = ladder(&mut rng, Side::Ask, mid + half);
        let n_trades = rng.random_range(0..=4);
        let trades = (0..n_trades)
            .map(|_| {
                let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
                let best = if side == Side::Bid { mid - half } else { mid + half };
                TradePrint {
                    resting_side: side,
                    price: best + side.outward() * rng.random_range(-1..=2),
                    quantity: rng.random_range(1..=12) as f64 * 0.25,
                }
            })
            .collect();
        let midpoint = (bids[0].price + asks[0].price) as f64 / 2.0 * tick_size;
        rows.push(SnapshotRow {
            timestamp_ns: t as i64,
            midpoint,
            best_bid: bids[0].price as f64 * tick_size,
            best_ask: asks[0].price as f64 * tick_size,
            buyer_notional: 0.0,
            seller_notional: 0.0,
            buyer_trades: 0,
            seller_trades: 0,
            ess: (0..ESS_WIDTH).map(|_| rng.random_range(-1.0..1.0)).collect(),
        });
        market.push(MarketStep { bids, asks, trades });
    }
    MarketDay {
        dataset: SnapshotDataset { instrument: "RND".into(), tick_size, date: format!("seed-{seed}"), rows },
        steps: market,
    }
}

/// Normalizer that leaves rows unchanged.
pub fn identity_normalizer() -> NormalizerStats {
    NormalizerStats { mean: vec![0.0; ESS_WIDTH], std: vec![1.0; ESS_WIDTH] }
}

fn scenario_env(rng: &mut ChaCha8Rng, seed: u64, steps: usize, reward: RewardKind) -> MarketMakingEnv {
    let config = EnvConfig {
        reward,
        window: 2,
        lot_size: [0.25, 1.0, 3.0][rng.random_range(0..3)],
        max_positions: rng.random_range(1..=6),
        ruin_threshold: -1e9,
        ..EnvConfig::default()
    };
    let day = random_market_day(seed, steps, [0.01, 0.5, 1.0][rng.random_range(0..3)]);
    MarketMakingEnv::new(config, vec![PreparedDay::new(day, identity_normalizer())], seed).expect("valid config")
}

fn random_action(rng: &mut ChaCha8Rng) -> ActionId {
    // Flatten often enough that positions open and close within a scenario.
    if rng.random_bool(0.1) {
        ActionId::FLATTEN
    } else {
        ActionId::from_index(rng.random_range(0..16)).expect("index in range")
    }
}

/// Runs one random action/fill scenario and checks the environment's
/// realized and unrealized PnL against [`ledger_pnl`] after every step, and
/// that every market order paid exactly the configured fee rate. Returns the
/// number of lots executed.
pub fn check_ledger_scenario(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let steps = rng.random_range(5..40);
    let mut env = scenario_env(&mut rng, seed, steps, RewardKind::PositionalPnl);
    let fee_rate = env.config().market_fee;
    let lot = env.config().lot_size;
    let mut ledger = Vec::new();
    env.reset().map_err(|e| e.to_string())?;
    let mut fees_before = 0.0;
    loop {
        let r = env.step(random_action(&mut rng)).map_err(|e| e.to_string())?;
        let mut expected_fees = 0.0;
        for e in &r.info.executions {
            let rate = if e.market_order { fee_rate } else { 0.0 };
            expected_fees += rate * e.price * e.lots as f64 * lot;
            for _ in 0..e.lots {
                ledger.push(LedgerTrade { side: e.side, price: e.price, fee_rate: rate });
            }
        }
        let paid = r.info.fees - fees_before;
        if (paid - expected_fees).abs() > 1e-12 * expected_fees.max(1.0) {
            return Err(format!("seed {seed} step {}: fees {paid} expected {expected_fees}", r.info.step));
        }
        fees_before = r.info.fees;
        let (realized, unrealized) = ledger_pnl(&ledger, lot, r.info.midpoint);
        if (realized - r.info.realized).abs() > 1e-9 || (unrealized - r.info.unrealized).abs() > 1e-9 {
            return Err(format!(
                "seed {seed} step {}: env ({}, {}) ledger ({realized}, {unrealized})",
                r.info.step, r.info.realized, r.info.unrealized
            ));
        }
        if (r.info.total_pnl - (r.info.realized + r.info.unrealized)).abs() > 1e-12 {
            return Err(format!("seed {seed}: total PnL is not realized + unrealized"));
        }
        if r.done {
            return Ok(ledger.len());
        }
    }
}

/// Runs random actions, flattens, and returns the summed positional rewards
/// together with the realized PnL of the episode, which starts and ends flat.
pub fn telescoping_scenario(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e1e);
    let steps = rng.random_range(5..60);
    let mut env = scenario_env(&mut rng, seed, steps, RewardKind::PositionalPnl);
    env.reset().expect("scenario day resets");
    let active = rng.random_range(1..steps - 2);
    let mut total = 0.0;
    for _ in 0..active {
        total += env.step(random_action(&mut rng)).expect("not done").reward;
    }
    // Flattening a flat account leaves its quotes working, so one of them
    // may still fill; a second flatten then cancels and closes it.
    loop {
        let r = env.step(ActionId::FLATTEN).expect("not done");
        total += r.reward;
        if r.info.inventory == 0 {
            return (total, r.info.realized);
        }
    }
}

/// Per-level cumulative notional by an explicit double loop.
pub fn naive_cumulative_notional(levels: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels.len());
    for i in 0..levels.len() {
        let mut total = 0.0;
        for (p, q) in &levels[..=i] {
            total += p * q;
        }
        out.push(total);
    }
    out
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn in_unit(v: f64) -> bool {
    (-1.0..=1.0).contains(&v)
}

/// Randomized property checks over the feature functions plus full replays
/// of synthetic days. Returns the number of checks performed.
pub fn feature_property_suite(seed: u64, cases: usize) -> Result<usize, String> {
    use crate::features::{
        cumulative_notional, custom_rsi, fit_normalizer, notional_imbalance, order_flow_imbalance,
        price_distance, trade_flow_imbalance, FlowAccumulators, CRSI, IOTA, TFI, WINDOWS,
    };
    use crate::lob::{EventOutcome, Fill, LevelChange};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0usize;
    let mut count = |r: Result<(), String>| -> Result<(), String> {
        checks += 1;
        r
    };
    for case in 0..cases {
        // Price distance: zero at the midpoint, signed by side, antisymmetric
        // for a symmetric book.
        let mid = rng.random_range(1.0..1e5);
        let n = rng.random_range(1..=LEVELS);
        let offsets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..mid * 0.01)).collect();
        let bids: Vec<f64> = offsets.iter().map(|o| mid - o).collect();
        let asks: Vec<f64> = offsets.iter().map(|o| mid + o).collect();
        let xi = price_distance(&bids, &asks, mid).map_err(|e| e.to_string())?;
        for i in 0..n {
            count(check(xi[i] <= 0.0 && xi[n + i] >= 0.0, || format!("case {case}: xi sign at level {i}")))?;
            count(check((xi[i] + xi[n + i]).abs() < 1e-12, || format!("case {case}: xi not antisymmetric")))?;
        }
        count(check(price_distance(&[mid], &[mid], mid).map_err(|e| e.to_string())? == [0.0, 0.0], || {
            format!("case {case}: xi at midpoint")
        }))?;

        // Cumulative notional against the double loop; monotone.
        let levels: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random_range(1.0..1e5), rng.random_range(0.0..100.0))).collect();
        let chi = cumulative_notional(&levels);
        let naive = naive_cumulative_notional(&levels);
        for i in 0..n {
            count(check((chi[i] - naive[i]).abs() <= 1e-9 * naive[i].abs().max(1.0), || {
                format!("case {case}: chi {} vs {}", chi[i], naive[i])
            }))?;
        }
        count(check(chi.windows(2).all(|w| w[1] >= w[0]), || format!("case {case}: chi not monotone")))?;

        // Notional imbalance: bounded, zero when equal, +-1 at the boundaries.
        let a: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1e7) }).collect();
        let b: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1e7) }).collect();
        for v in notional_imbalance(&b, &a) {
            count(check(in_unit(v), || format!("case {case}: iota {v} out of range")))?;
        }
        count(check(notional_imbalance(&a, &a).iter().all(|v| *v == 0.0), || format!("case {case}: iota symmetry")))?;
        let positive: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let zeros = vec![0.0; n];
        count(check(notional_imbalance(&zeros, &positive).iter().all(|v| *v == 1.0), || {
            format!("case {case}: iota upper boundary")
        }))?;
        count(check(notional_imbalance(&positive, &zeros).iter().all(|v| *v == -1.0), || {
            format!("case {case}: iota lower boundary")
        }))?;

        // Order flow: accumulated through `record`, compared with direct sums.
        let tick = rng.random_range(0.01..1.0);
        let mut acc = FlowAccumulators::default();
        let mut expect = [[0.0f64; LEVELS]; 2];
        for _ in 0..rng.random_range(0..40) {
            let side = if rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
            let s = usize::from(side == Side::Ask);
            let level = rng.random_range(0..LEVELS + 3);
            let price: Ticks = rng.random_range(1..10_000);
            let quantity = rng.random_range(0.01..5.0);
            let notional = price as f64 * tick * quantity;
            let change = LevelChange { side, price, quantity, level };
            let outcome = match rng.random_range(0..3) {
                0 => {
                    if level < LEVELS {
                        expect[s][level] += notional;
                    }
                    EventOutcome { added: Some(change), ..Default::default() }
                }
                1 => {
                    if level < LEVELS {
                        expect[s][level] -= notional;
                    }
                    EventOutcome { cancelled: Some(change), ..Default::default() }
                }
                _ => {
                    if level < LEVELS {
                        expect[s][level] -= notional;
                    }
                    let fill = Fill { order_id: OrderId(1), side, price, quantity, level };
                    EventOutcome { fills: vec![fill], ..Default::default() }
                }
            };
            acc.record(&outcome, tick);
        }
        let ofi = order_flow_imbalance(&acc);
        for s in 0..2 {
            for i in 0..LEVELS {
                let got = ofi[s * LEVELS + i];
                count(check((got - expect[s][i]).abs() <= 1e-9 * expect[s][i].abs().max(1.0), || {
                    format!("case {case}: ofi side {s} level {i}: {got} vs {}", expect[s][i])
                }))?;
            }
        }

        // Trade flow imbalance: bounded and antisymmetric in buyer/seller.
        let len = rng.random_range(0..60);
        let buyer: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1e6)).collect();
        let seller: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1e6)).collect();
        let w = rng.random_range(1..80);
        let t = trade_flow_imbalance(&buyer, &seller, w);
        count(check(in_unit(t), || format!("case {case}: tfi {t} out of range")))?;
        count(check((t + trade_flow_imbalance(&seller, &buyer, w)).abs() < 1e-12, || {
            format!("case {case}: tfi not antisymmetric")
        }))?;

        // Custom RSI: bounded; +1 on rising, -1 on falling, 0 on flat paths.
        let mids: Vec<f64> = (0..len).map(|_| rng.random_range(1.0..1e5)).collect();
        count(check(in_unit(custom_rsi(&mids, w)), || format!("case {case}: crsi out of range")))?;
        let start = rng.random_range(10.0..1e4);
        let rising: Vec<f64> = (0..len.max(2)).map(|i| start + i as f64).collect();
        let falling: Vec<f64> = rising.iter().rev().copied().collect();
        count(check(custom_rsi(&rising, w) == 1.0, || format!("case {case}: rising crsi")))?;
        count(check(custom_rsi(&falling, w) == -1.0, || format!("case {case}: falling crsi")))?;
        count(check(custom_rsi(&vec![start; len], w) == 0.0, || format!("case {case}: flat crsi")))?;

        // Normalizer fitted on its own rows: zero mean, unit deviation,
        // constant columns map to 0, outliers clip at 10.
        let rows: Vec<Vec<f64>> = (0..rng.random_range(2..60))
            .map(|_| vec![rng.random_range(-1e3..1e3), 7.5, rng.random_range(0.0..1.0)])
            .collect();
        let stats = fit_normalizer(&rows).map_err(|e| e.to_string())?;
        let z: Vec<Vec<f64>> = rows.iter().map(|r| stats.normalize(r)).collect();
        let m = z.len() as f64;
        for c in [0, 2] {
            let mean = z.iter().map(|r| r[c]).sum::<f64>() / m;
            let var = z.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / m;
            let distinct = rows.iter().any(|r| r[c] != rows[0][c]);
            count(check(mean.abs() < 1e-9, || format!("case {case}: normalized mean {mean}")))?;
            if distinct && z.iter().all(|r| r[c].abs() < 10.0) {
                count(check((var.sqrt() - 1.0).abs() < 1e-9, || format!("case {case}: normalized std {}", var.sqrt())))?;
            }
        }
        count(check(z.iter().all(|r| r[1] == 0.0), || format!("case {case}: constant column")))?;
        let far = stats.normalize(&[stats.mean[0] + 100.0 * stats.std[0], 7.5, stats.mean[2] - 100.0 * stats.std[2]]);
        count(check(far[0] == 10.0 && far[2] == -10.0, || format!("case {case}: clip {far:?}")))?;
    }

    // Whole-day replays: every bounded column stays in [-1, 1], all finite.
    for k in 0..3 {
        let config = crate::synthetic::SyntheticConfig { seconds: 600, seed: seed.wrapping_add(k), ..Default::default() };
        let ticks = crate::synthetic::generate(&config);
        let ds = crate::pipeline::replay_to_snapshots(&ticks, &crate::pipeline::ReplayConfig::default())
            .map_err(|e| e.to_string())?;
        for row in &ds.rows {
            count(check(row.ess.iter().all(|v| v.is_finite()), || "non-finite feature".into()))?;
            let bounded = row.ess[IOTA..IOTA + LEVELS]
                .iter()
                .chain(&row.ess[TFI..TFI + 2 * WINDOWS])
                .chain(&row.ess[CRSI..CRSI + WINDOWS]);
            for v in bounded {
                count(check(in_unit(*v), || format!("replayed feature {v} out of range")))?;
            }
        }
    }
    Ok(checks)
}
