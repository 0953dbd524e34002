//! Episode summaries and per-step traces for evaluation output.

use serde::{Deserialize, Serialize};

use crate::env::{ExecutionRecord, StepInfo};

/// One evaluation episode, summarised.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub agent: String,
    pub reward: String,
    pub instrument: String,
    pub date: String,
    pub steps: usize,
    /// Realized plus unrealized PnL at the final snapshot, in return units.
    pub total_pnl: f64,
    pub realized_pnl: f64,
    pub unrealized_pnl: f64,
    /// `total_pnl` in percent.
    pub daily_return_pct: f64,
    /// Mean PnL per closed round trip, in percent.
    pub mean_trade_return_pct: f64,
    /// Monetary fees paid on market orders.
    pub fees: f64,
    pub executions: usize,
    pub market_orders: usize,
    pub round_trips: usize,
    /// Share of round trips with positive PnL.
    pub win_rate: f64,
    /// Largest peak-to-trough fall of total PnL.
    pub max_drawdown: f64,
    pub max_abs_inventory: i64,
    pub mean_abs_inventory: f64,
    pub final_inventory: i64,
    pub total_reward: f64,
    pub ruined: bool,
}

/// Per-step series of one episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<usize>,
    pub equity: Vec<f64>,
    pub inventory: Vec<i64>,
    pub midpoint: Vec<f64>,
    pub executions: Vec<ExecutionRecord>,
}

/// Accumulates step results into a trace and a report.
#[derive(Clone, Debug, Default)]
pub struct EpisodeRecorder {
    trace: EpisodeTrace,
    total_reward: f64,
    round_trips: usize,
    wins: usize,
    trade_pnl_sum: f64,
    last: StepInfo,
}

impl EpisodeRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, reward: f64, info: &StepInfo) {
        self.total_reward += reward;
        self.trace.steps.push(info.step);
        self.trace.equity.push(info.total_pnl);
        self.trace.inventory.push(info.inventory);
        self.trace.midpoint.push(info.midpoint);
        for e in &info.executions {
            self.trace.executions.push(*e);
        }
        self.last = info.clone();
    }

    /// Counts closed round trips; the environment reports them through the
    /// account so the caller passes the closed-trade PnLs here.
    pub fn record_round_trips<'a>(&mut self, pnls: impl IntoIterator<Item = &'a f64>) {
        for p in pnls {
            self.round_trips += 1;
            self.trade_pnl_sum += *p;
            if *p > 0.0 {
                self.wins += 1;
            }
        }
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn finish(self, agent: &str, reward: &str, instrument: &str, date: &str) -> (EpisodeReport, EpisodeTrace) {
        let t = &self.trace;
        let mut peak = 0.0f64;
        let mut drawdown = 0.0f64;
        for &e in &t.equity {
            peak = peak.max(e);
            drawdown = drawdown.max(peak - e);
        }
        let n = t.inventory.len();
        let report = EpisodeReport {
            agent: agent.into(),
            reward: reward.into(),
            instrument: instrument.into(),
            date: date.into(),
            steps: n,
            total_pnl: self.last.total_pnl,
            realized_pnl: self.last.realized,
            unrealized_pnl: self.last.unrealized,
            daily_return_pct: 100.0 * self.last.total_pnl,
            mean_trade_return_pct: if self.round_trips > 0 { 100.0 * self.trade_pnl_sum / self.round_trips as f64 } else { 0.0 },
            fees: self.last.fees,
            executions: t.executions.iter().map(|e| e.lots as usize).sum(),
            market_orders: t.executions.iter().filter(|e| e.market_order).count(),
            round_trips: self.round_trips,
            win_rate: if self.round_trips > 0 { self.wins as f64 / self.round_trips as f64 } else { 0.0 },
            max_drawdown: drawdown,
            max_abs_inventory: t.inventory.iter().map(|i| i.abs()).max().unwrap_or(0),
            mean_abs_inventory: if n > 0 { t.inventory.iter().map(|i| i.abs() as f64).sum::<f64>() / n as f64 } else { 0.0 },
            final_inventory: self.last.inventory,
            total_reward: self.total_reward,
            ruined: self.last.ruined,
        };
        (report, self.trace)
    }
}
