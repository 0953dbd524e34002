//! Market-making environment replaying recorded snapshot days.
//!
//! Each step the agent picks one of [`N_ACTIONS`] actions. Quoting actions
//! rest a one-lot bid and ask at chosen ladder depths of the current book;
//! the trades printed during the following interval decide whether they
//! fill. The observation is a window of feature rows, each holding the
//! normalized market features, the agent's own state and a one-hot encoding
//! of its last action.

pub mod account;
pub mod orders;
pub mod reward;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    build_observation, NormalizerStats, ObservationFrame, AAS_WIDTH, ASS_WIDTH, ESS_WIDTH, FEATURE_WIDTH, REWARD,
};
use crate::lob::{DepthLevel, Side};
use crate::pipeline::MarketDay;

pub use account::{Account, ClosedTrade};
pub use orders::{placement, refresh_queue, simulate_fills, Action, ActionId, AgentOrder, N_ACTIONS};
pub use reward::RewardKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("day {0} has no fitted normalizer")]
    MissingNormalizer(usize),
    #[error("dataset needs at least two snapshots, got {0}")]
    EmptyDataset(usize),
    #[error("no days to sample from")]
    NoDays,
    #[error("step called after the episode ended")]
    SteppedAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("invalid action index {0}")]
    InvalidAction(usize),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub reward: RewardKind,
    /// Daily PnL target scaling the total PnL feature.
    pub rho: f64,
    pub epsilon: f64,
    pub varpi: f64,
    /// Fee rate on market orders.
    pub market_fee: f64,
    pub max_positions: i64,
    pub window: usize,
    pub feature_width: usize,
    /// Base units per lot.
    pub lot_size: f64,
    /// Episode ends when total PnL per unit of position capacity falls to
    /// this level.
    pub ruin_threshold: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardKind::PositionalPnl,
            rho: 0.01,
            epsilon: 2.0,
            varpi: 0.002,
            market_fee: 0.002,
            max_positions: 10,
            window: 100,
            feature_width: FEATURE_WIDTH,
            lot_size: 1.0,
            ruin_threshold: -0.05,
        }
    }
}

impl EnvConfig {
    /// Returns every problem found, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let positive = [
            ("rho", self.rho),
            ("epsilon", self.epsilon),
            ("varpi", self.varpi),
            ("lot_size", self.lot_size),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.market_fee.is_finite() && (0.0..1.0).contains(&self.market_fee)) {
            problems.push(format!("market_fee must be in [0, 1), got {}", self.market_fee));
        }
        if self.max_positions < 1 {
            problems.push(format!("max_positions must be at least 1, got {}", self.max_positions));
        }
        if self.window == 0 {
            problems.push("window must be at least 1".into());
        }
        if self.feature_width < FEATURE_WIDTH {
            problems.push(format!("feature_width must be at least {FEATURE_WIDTH}, got {}", self.feature_width));
        }
        if !(self.ruin_threshold.is_finite() && self.ruin_threshold < 0.0) {
            problems.push(format!("ruin_threshold must be negative, got {}", self.ruin_threshold));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn observation_len(&self) -> usize {
        self.window * self.feature_width
    }
}

/// A replayed day with the statistics used to normalize it.
#[derive(Clone, Debug)]
pub struct PreparedDay {
    pub market: Arc<MarketDay>,
    pub normalizer: Option<Arc<NormalizerStats>>,
}

impl PreparedDay {
    pub fn new(market: MarketDay, normalizer: NormalizerStats) -> Self {
        Self { market: Arc::new(market), normalizer: Some(Arc::new(normalizer)) }
    }
}

/// One execution of an agent order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub step: usize,
    /// `Bid` for a buy, `Ask` for a sell.
    pub side: Side,
    pub price: f64,
    pub lots: u32,
    pub market_order: bool,
    /// Realized PnL booked by this execution.
    pub realized: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub executions: Vec<ExecutionRecord>,
    pub inventory: i64,
    pub realized: f64,
    pub unrealized: f64,
    pub total_pnl: f64,
    pub fees: f64,
    pub midpoint: f64,
    pub ruined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: ObservationFrame,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Agent state features for the current step.
///
/// Layout: long and short inventory utilisation, total PnL over `rho`,
/// unrealized return of the long and short books, relative distance of the
/// bid and ask orders to the midpoint, and queue progress of both orders.
pub fn ass_vector(
    account: &Account,
    bid: Option<&AgentOrder>,
    ask: Option<&AgentOrder>,
    midpoint: f64,
    tick_size: f64,
    config: &EnvConfig,
) -> [f64; ASS_WIDTH] {
    let cap = config.max_positions as f64;
    let unreal_long = account.average_price(Side::Bid).map_or(0.0, |p| midpoint / p - 1.0);
    let unreal_short = account.average_price(Side::Ask).map_or(0.0, |p| p / midpoint - 1.0);
    let distance = |o: Option<&AgentOrder>| o.map_or(0.0, |o| o.price as f64 * tick_size / midpoint - 1.0);
    let progress = |o: Option<&AgentOrder>| {
        o.map_or(0.0, |o| {
            let denom = o.queue_ahead + o.size;
            if denom > 0.0 {
                (o.executed() - o.queue_ahead) / denom
            } else {
                0.0
            }
        })
    };
    [
        account.long_lots() as f64 / cap,
        account.short_lots() as f64 / cap,
        account.total_pnl(midpoint) / config.rho,
        unreal_long,
        unreal_short,
        distance(bid),
        distance(ask),
        progress(bid),
        progress(ask),
    ]
}

/// Volume-weighted price, in ticks, of sweeping `quantity` from a ladder.
/// Quantity beyond the visible liquidity executes at the deepest priced
/// level; an empty ladder returns `None`.
pub fn sweep_price(ladder: &[DepthLevel], quantity: f64) -> Option<f64> {
    let mut left = quantity;
    let mut notional = 0.0;
    let mut last = None;
    for level in ladder.iter().filter(|l| l.quantity > 0.0) {
        let q = left.min(level.quantity);
        notional += q * level.price as f64;
        left -= q;
        last = Some(level.price);
        if left <= 0.0 {
            break;
        }
    }
    let last = last?;
    if left > 0.0 {
        notional += left * last as f64;
    }
    Some(notional / quantity)
}

#[derive(Clone, Debug)]
struct Episode {
    day: usize,
    market: Arc<MarketDay>,
    normalizer: Arc<NormalizerStats>,
    t: usize,
    account: Account,
    bid: Option<AgentOrder>,
    ask: Option<AgentOrder>,
    last_action: ActionId,
    last_reward: f64,
    history: VecDeque<Vec<f64>>,
    done: bool,
}

/// The environment. Single-threaded; run several instances for parallelism.
#[derive(Clone, Debug)]
pub struct MarketMakingEnv {
    config: EnvConfig,
    days: Vec<PreparedDay>,
    rng: ChaCha8Rng,
    episode: Option<Episode>,
}

impl MarketMakingEnv {
    pub fn new(config: EnvConfig, days: Vec<PreparedDay>, seed: u64) -> Result<Self, EnvError> {
        config.validate().map_err(|p| EnvError::InvalidConfig(p.join("; ")))?;
        if days.is_empty() {
            return Err(EnvError::NoDays);
        }
        Ok(Self { config, days, rng: ChaCha8Rng::seed_from_u64(seed), episode: None })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn days(&self) -> &[PreparedDay] {
        &self.days
    }

    pub fn observation_len(&self) -> usize {
        self.config.observation_len()
    }

    pub fn account(&self) -> Option<&Account> {
        self.episode.as_ref().map(|e| &e.account)
    }

    pub fn orders(&self) -> (Option<&AgentOrder>, Option<&AgentOrder>) {
        match &self.episode {
            Some(e) => (e.bid.as_ref(), e.ask.as_ref()),
            None => (None, None),
        }
    }

    /// Index of the current snapshot within the day.
    pub fn position(&self) -> Option<(usize, usize)> {
        self.episode.as_ref().map(|e| (e.day, e.t))
    }

    /// Starts an episode on a randomly drawn day.
    pub fn reset(&mut self) -> Result<StepResult, EnvError> {
        let day = self.rng.random_range(0..self.days.len());
        self.reset_day(day)
    }

    /// Starts an episode on day `day`.
    pub fn reset_day(&mut self, day: usize) -> Result<StepResult, EnvError> {
        let prepared = self.days.get(day).ok_or(EnvError::NoDays)?;
        let normalizer = prepared.normalizer.clone().ok_or(EnvError::MissingNormalizer(day))?;
        let market = prepared.market.clone();
        if market.len() < 2 {
            return Err(EnvError::EmptyDataset(market.len()));
        }
        let mut ep = Episode {
            day,
            market,
            normalizer,
            t: 0,
            account: Account::new(self.config.lot_size),
            bid: None,
            ask: None,
            last_action: ActionId::NO_ACTION,
            last_reward: 0.0,
            history: VecDeque::with_capacity(self.config.window + 1),
            done: false,
        };
        let mid = ep.market.dataset.rows[0].midpoint;
        push_row(&mut ep, &self.config);
        let info = StepInfo { midpoint: mid, ..StepInfo::default() };
        let observation = observe(&mut ep, &self.config);
        self.episode = Some(ep);
        Ok(StepResult { observation, reward: 0.0, done: false, info })
    }

    /// Steps with a zero-based action index.
    pub fn step_index(&mut self, index: usize) -> Result<StepResult, EnvError> {
        let action = ActionId::from_index(index).ok_or(EnvError::InvalidAction(index))?;
        self.step(action)
    }

    pub fn step(&mut self, action: ActionId) -> Result<StepResult, EnvError> {
        let config = &self.config;
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.done {
            return Err(EnvError::SteppedAfterDone);
        }
        let market = ep.market.clone();
        let tick = market.tick_size();
        let t = ep.t;
        let now = &market.steps[t];
        let next = &market.steps[t + 1];
        let mid_before = market.dataset.rows[t].midpoint;
        let mid_after = market.dataset.rows[t + 1].midpoint;
        let unrealized_before = ep.account.unrealized(mid_before);
        let mut executions = Vec::new();
        let mut realized_step = 0.0;
        let closed_before = ep.account.closed_trades().len();

        match action.action() {
            Action::NoAction => {}
            Action::Flatten => {
                let ic = ep.account.inventory();
                if ic != 0 {
                    ep.bid = None;
                    ep.ask = None;
                    let side = if ic > 0 { Side::Ask } else { Side::Bid };
                    let lots = ic.unsigned_abs();
                    let contra = match side {
                        Side::Ask => &now.bids,
                        Side::Bid => &now.asks,
                    };
                    let price = sweep_price(contra, lots as f64 * config.lot_size)
                        .map_or(mid_before, |p| p * tick);
                    let mut realized = 0.0;
                    for _ in 0..lots {
                        realized += ep.account.execute(side, price, config.market_fee, t);
                    }
                    realized_step += realized;
                    executions.push(ExecutionRecord {
                        step: t,
                        side,
                        price,
                        lots: lots as u32,
                        market_order: true,
                        realized,
                    });
                }
            }
            Action::Quote { bid_level, ask_level } => {
                let ic = ep.account.inventory();
                ep.bid = if ic < config.max_positions {
                    Some(requote(ep.bid.take(), Side::Bid, bid_level, &now.bids, &now.asks, config.lot_size))
                } else {
                    None
                };
                ep.ask = if ic > -config.max_positions {
                    Some(requote(ep.ask.take(), Side::Ask, ask_level, &now.asks, &now.bids, config.lot_size))
                } else {
                    None
                };
            }
        }

        for slot in [&mut ep.bid, &mut ep.ask] {
            let Some(order) = slot.as_mut() else { continue };
            simulate_fills(order, &next.trades);
            if order.is_filled() {
                let price = order.average_fill_price().unwrap_or(order.price as f64) * tick;
                let side = order.side;
                let realized = ep.account.execute(side, price, 0.0, t);
                realized_step += realized;
                executions.push(ExecutionRecord { step: t, side, price, lots: 1, market_order: false, realized });
                *slot = None;
            } else {
                let ladder = match order.side {
                    Side::Bid => &next.bids,
                    Side::Ask => &next.asks,
                };
                refresh_queue(order, ladder);
            }
        }
        let closed_any = ep.account.closed_trades().len() > closed_before;

        let unrealized_after = ep.account.unrealized(mid_after);
        let reward = match config.reward {
            RewardKind::PositionalPnl => reward::positional_pnl(unrealized_before, unrealized_after, realized_step),
            RewardKind::TradeCompletion => {
                reward::trade_completion(closed_any.then_some(realized_step), config.epsilon, config.varpi)
            }
        };

        ep.t = t + 1;
        ep.last_action = action;
        ep.last_reward = reward;
        let total = ep.account.total_pnl(mid_after);
        let ruined = total / config.max_positions as f64 <= config.ruin_threshold;
        ep.done = ep.t + 1 >= market.len() || ruined;
        push_row(ep, config);
        let observation = observe(ep, config);
        let info = StepInfo {
            step: ep.t,
            executions,
            inventory: ep.account.inventory(),
            realized: ep.account.realized(),
            unrealized: unrealized_after,
            total_pnl: total,
            fees: ep.account.fees(),
            midpoint: mid_after,
            ruined,
        };
        Ok(StepResult { observation, reward, done: ep.done, info })
    }
}

/// Places or replaces a one-lot order. Keeping the price keeps the queue
/// position; a new price starts a new queue but carries any partial fill.
fn requote(
    existing: Option<AgentOrder>,
    side: Side,
    level: usize,
    own: &[DepthLevel],
    contra: &[DepthLevel],
    lot_size: f64,
) -> AgentOrder {
    let (price, queue) = placement(side, level, own, contra);
    match existing {
        Some(order) if order.price == price => order,
        Some(mut order) => {
            // Partial executions stay at their original prices.
            order.price = price;
            order.queue_ahead = queue;
            order
        }
        None => AgentOrder::new(side, price, lot_size, queue),
    }
}

fn push_row(ep: &mut Episode, config: &EnvConfig) {
    let t = ep.t;
    let market = &ep.market;
    let snapshot = &market.dataset.rows[t];
    let mut row = Vec::with_capacity(ESS_WIDTH + ASS_WIDTH + AAS_WIDTH);
    row.extend_from_slice(&snapshot.ess);
    ep.normalizer.normalize_in_place(&mut row);
    row[REWARD] = ep.last_reward;
    row.extend_from_slice(&ass_vector(
        &ep.account,
        ep.bid.as_ref(),
        ep.ask.as_ref(),
        snapshot.midpoint,
        market.tick_size(),
        config,
    ));
    let mut aas = [0.0; AAS_WIDTH];
    aas[ep.last_action.index()] = 1.0;
    row.extend_from_slice(&aas);
    if ep.history.len() == config.window {
        ep.history.pop_front();
    }
    ep.history.push_back(row);
}

fn observe(ep: &mut Episode, config: &EnvConfig) -> ObservationFrame {
    build_observation(ep.history.make_contiguous(), config.window, config.feature_width)
}
