//! Environment state features computed from book snapshots and order flow.
//!
//! A snapshot row has a fixed layout of [`ESS_WIDTH`] values:
//!
//! | range     | feature                                              |
//! |-----------|------------------------------------------------------|
//! | 0..30     | level price distance to midpoint (15 bid, 15 ask)    |
//! | 30..60    | cumulative notional per level (15 bid, 15 ask)       |
//! | 60..75    | cumulative notional imbalance per level              |
//! | 75..105   | order flow imbalance per level (15 bid, 15 ask)      |
//! | 105..111  | trade flow imbalance: notional then trade count, per window |
//! | 111       | spread                                               |
//! | 112..115  | custom RSI per window                                |
//! | 115       | previous reward                                      |

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lob::{DepthLevel, EventOutcome, Side};

pub const LEVELS: usize = 15;
pub const WINDOWS: usize = 3;

pub const XI: usize = 0;
pub const CHI: usize = XI + 2 * LEVELS;
pub const IOTA: usize = CHI + 2 * LEVELS;
pub const OFI: usize = IOTA + LEVELS;
pub const TFI: usize = OFI + 2 * LEVELS;
pub const SPREAD: usize = TFI + 2 * WINDOWS;
pub const CRSI: usize = SPREAD + 1;
pub const REWARD: usize = CRSI + WINDOWS;
pub const ESS_WIDTH: usize = REWARD + 1;

/// Agent state width (inventory, pnl, order distance and completion).
pub const ASS_WIDTH: usize = 9;
/// One-hot encoding of the latest action.
pub const AAS_WIDTH: usize = 17;
pub const FEATURE_WIDTH: usize = ESS_WIDTH + ASS_WIDTH + AAS_WIDTH;

/// Snapshot counts for the 5, 15 and 30 minute windows at one snapshot per second.
pub const DEFAULT_WINDOWS: [usize; WINDOWS] = [300, 900, 1800];

/// Bound applied to z-scored values.
pub const NORMALIZED_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("midpoint must be positive, got {0}")]
    ZeroMidpoint(f64),
    #[error("need at least {needed} rows to fit a normalizer, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("row has {got} columns, expected {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

/// `p / m - 1` for every level, bids first.
pub fn price_distance(bids: &[f64], asks: &[f64], midpoint: f64) -> Result<Vec<f64>, FeatureError> {
    if midpoint.is_nan() || midpoint <= 0.0 {
        return Err(FeatureError::ZeroMidpoint(midpoint));
    }
    Ok(bids.iter().chain(asks).map(|p| p / midpoint - 1.0).collect())
}

/// Running sum of `price * quantity` from the best level outward.
pub fn cumulative_notional(levels: &[(f64, f64)]) -> Vec<f64> {
    levels
        .iter()
        .scan(0.0, |acc, (p, q)| {
            *acc += p * q;
            Some(*acc)
        })
        .collect()
}

/// `(a - b) / (a + b)`, 0 when both are 0.
fn imbalance(a: f64, b: f64) -> f64 {
    let total = a + b;
    if total == 0.0 {
        0.0
    } else {
        (a - b) / total
    }
}

/// `(chi_ask - chi_bid) / (chi_ask + chi_bid)` per level.
pub fn notional_imbalance(chi_bid: &[f64], chi_ask: &[f64]) -> Vec<f64> {
    chi_bid.iter().zip(chi_ask).map(|(b, a)| imbalance(*a, *b)).collect()
}

/// Notional order flow per side and level since the last snapshot, plus
/// buyer/seller initiated trade totals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowAccumulators {
    pub limit: [[f64; LEVELS]; 2],
    pub cancel: [[f64; LEVELS]; 2],
    pub market: [[f64; LEVELS]; 2],
    pub buyer_notional: f64,
    pub seller_notional: f64,
    pub buyer_trades: u32,
    pub seller_trades: u32,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Bid => 0,
        Side::Ask => 1,
    }
}

impl FlowAccumulators {
    /// Adds one event's effect. Level ranks beyond [`LEVELS`] are not tracked.
    pub fn record(&mut self, outcome: &EventOutcome, tick_size: f64) {
        if let Some(add) = &outcome.added {
            if add.level < LEVELS {
                self.limit[side_index(add.side)][add.level] += add.price as f64 * tick_size * add.quantity;
            }
        }
        if let Some(cancel) = &outcome.cancelled {
            if cancel.level < LEVELS {
                self.cancel[side_index(cancel.side)][cancel.level] +=
                    cancel.price as f64 * tick_size * cancel.quantity;
            }
        }
        if let Some(first) = outcome.fills.first() {
            let mut notional = 0.0;
            for fill in &outcome.fills {
                let n = fill.price as f64 * tick_size * fill.quantity;
                notional += n;
                if fill.level < LEVELS {
                    self.market[side_index(fill.side)][fill.level] += n;
                }
            }
            // Consuming ask liquidity means the aggressor was a buyer.
            match first.side {
                Side::Ask => {
                    self.buyer_notional += notional;
                    self.buyer_trades += 1;
                }
                Side::Bid => {
                    self.seller_notional += notional;
                    self.seller_trades += 1;
                }
            }
        }
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// `limit - cancel - market` notional per level, bids first.
pub fn order_flow_imbalance(acc: &FlowAccumulators) -> Vec<f64> {
    (0..2)
        .flat_map(|s| (0..LEVELS).map(move |i| (s, i)))
        .map(|(s, i)| acc.limit[s][i] - acc.cancel[s][i] - acc.market[s][i])
        .collect()
}

/// Imbalance of buyer versus seller initiated flow over the last `window`
/// entries of each history (fewer if the history is shorter).
pub fn trade_flow_imbalance(buyer: &[f64], seller: &[f64], window: usize) -> f64 {
    let tail = |xs: &[f64]| -> f64 { xs[xs.len().saturating_sub(window)..].iter().sum() };
    imbalance(tail(buyer), tail(seller))
}

/// Sum-based RSI over the last `window` midpoint returns, scaled to [-1, 1].
pub fn custom_rsi(midpoints: &[f64], window: usize) -> f64 {
    if midpoints.len() < 2 {
        return 0.0;
    }
    let start = midpoints.len().saturating_sub(window + 1);
    let mut gain = 0.0;
    let mut loss = 0.0;
    for pair in midpoints[start..].windows(2) {
        let ret = pair[1] / pair[0] - 1.0;
        if ret > 0.0 {
            gain += ret;
        } else if ret < 0.0 {
            loss += ret.abs();
        }
    }
    imbalance(gain, loss)
}

/// Per-column mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fits z-score statistics. Columns whose deviation is negligible relative to
/// their mean get a deviation of 1 so they normalize to ~0.
pub fn fit_normalizer<R: AsRef<[f64]>>(rows: &[R]) -> Result<NormalizerStats, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::InsufficientData { needed: 2, got: rows.len() });
    }
    let width = rows[0].as_ref().len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for row in rows {
        let row = row.as_ref();
        if row.len() != width {
            return Err(FeatureError::WidthMismatch { expected: width, got: row.len() });
        }
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for row in rows {
        for ((v, x), m) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .iter()
        .zip(&mean)
        .map(|(v, m)| {
            let s = (v / n).sqrt();
            if s.is_finite() && s > 1e-12 * m.abs().max(1.0) {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(NormalizerStats { mean, std })
}

impl NormalizerStats {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    /// z-scores `row` in place, clipped to +-[`NORMALIZED_CLIP`].
    pub fn normalize_in_place(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = ((*x - m) / s).clamp(-NORMALIZED_CLIP, NORMALIZED_CLIP);
        }
    }

    pub fn normalize(&self, row: &[f64]) -> Vec<f64> {
        let mut out = row.to_vec();
        self.normalize_in_place(&mut out);
        out
    }
}

/// Window of lagged feature rows, oldest first, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationFrame {
    pub window: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl ObservationFrame {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    /// The row `lag` snapshots before the newest one.
    pub fn lag(&self, lag: usize) -> &[f64] {
        self.row(self.window - 1 - lag)
    }
}

/// Stacks the last `window` rows of `history`, zero-padding at the front when
/// fewer exist. Rows are truncated or zero-extended to `width`.
pub fn build_observation<R: AsRef<[f64]>>(history: &[R], window: usize, width: usize) -> ObservationFrame {
    let mut data = vec![0.0; window * width];
    let take = history.len().min(window);
    let pad = window - take;
    for (i, row) in history[history.len() - take..].iter().enumerate() {
        let row = row.as_ref();
        let n = row.len().min(width);
        let start = (pad + i) * width;
        data[start..start + n].copy_from_slice(&row[..n]);
    }
    ObservationFrame { window, width, data }
}

/// Computes snapshot rows, keeping the per-snapshot trade and midpoint
/// history that the windowed indicators need.
#[derive(Clone, Debug)]
pub struct SnapshotFeatures {
    windows: [usize; WINDOWS],
    buyer_notional: VecDeque<f64>,
    seller_notional: VecDeque<f64>,
    buyer_count: VecDeque<f64>,
    seller_count: VecDeque<f64>,
    midpoints: VecDeque<f64>,
}

impl SnapshotFeatures {
    pub fn new(windows: [usize; WINDOWS]) -> Self {
        Self {
            windows,
            buyer_notional: VecDeque::new(),
            seller_notional: VecDeque::new(),
            buyer_count: VecDeque::new(),
            seller_count: VecDeque::new(),
            midpoints: VecDeque::new(),
        }
    }

    fn push(history: &mut VecDeque<f64>, value: f64, cap: usize) {
        if history.len() == cap {
            history.pop_front();
        }
        history.push_back(value);
    }

    /// Builds the row for one snapshot. `bids`/`asks` are the padded depth
    /// ladders (monetary price, quantity), best first.
    pub fn snapshot(
        &mut self,
        bids: &[(f64, f64)],
        asks: &[(f64, f64)],
        midpoint: f64,
        flow: &FlowAccumulators,
        reward: f64,
    ) -> Result<[f64; ESS_WIDTH], FeatureError> {
        let max_window = self.windows.iter().copied().max().unwrap_or(1);
        Self::push(&mut self.buyer_notional, flow.buyer_notional, max_window);
        Self::push(&mut self.seller_notional, flow.seller_notional, max_window);
        Self::push(&mut self.buyer_count, flow.buyer_trades as f64, max_window);
        Self::push(&mut self.seller_count, flow.seller_trades as f64, max_window);
        Self::push(&mut self.midpoints, midpoint, max_window + 1);

        let mut row = [0.0; ESS_WIDTH];
        let bid_prices: Vec<f64> = bids.iter().map(|l| l.0).collect();
        let ask_prices: Vec<f64> = asks.iter().map(|l| l.0).collect();
        let xi = price_distance(&bid_prices, &ask_prices, midpoint)?;
        row[XI..XI + 2 * LEVELS].copy_from_slice(&xi);
        let chi_bid = cumulative_notional(bids);
        let chi_ask = cumulative_notional(asks);
        row[CHI..CHI + LEVELS].copy_from_slice(&chi_bid);
        row[CHI + LEVELS..CHI + 2 * LEVELS].copy_from_slice(&chi_ask);
        row[IOTA..IOTA + LEVELS].copy_from_slice(&notional_imbalance(&chi_bid, &chi_ask));
        row[OFI..OFI + 2 * LEVELS].copy_from_slice(&order_flow_imbalance(flow));

        let bn = self.buyer_notional.make_contiguous();
        let sn = self.seller_notional.make_contiguous();
        for (k, w) in self.windows.iter().enumerate() {
            row[TFI + k] = trade_flow_imbalance(bn, sn, *w);
        }
        let bc = self.buyer_count.make_contiguous();
        let sc = self.seller_count.make_contiguous();
        for (k, w) in self.windows.iter().enumerate() {
            row[TFI + WINDOWS + k] = trade_flow_imbalance(bc, sc, *w);
        }
        row[SPREAD] = ask_prices[0] - bid_prices[0];
        let mids = self.midpoints.make_contiguous();
        for (k, w) in self.windows.iter().enumerate() {
            row[CRSI + k] = custom_rsi(mids, *w);
        }
        row[REWARD] = reward;
        Ok(row)
    }
}

/// Converts a tick ladder into (monetary price, quantity) pairs.
pub fn ladder_to_prices(levels: &[DepthLevel], tick_size: f64) -> Vec<(f64, f64)> {
    levels.iter().map(|l| (l.price as f64 * tick_size, l.quantity)).collect()
}
