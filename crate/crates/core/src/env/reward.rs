//! Reward functions.

use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[serde(alias = "positional")]
    PositionalPnl,
    TradeCompletion,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::PositionalPnl => "positional_pnl",
            RewardKind::TradeCompletion => "trade_completion",
        }
    }
}

impl std::fmt::Display for RewardKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RewardKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positional_pnl" | "positional" => Ok(RewardKind::PositionalPnl),
            "trade_completion" => Ok(RewardKind::TradeCompletion),
            other => Err(format!("unknown reward `{other}` (expected positional_pnl or trade_completion)")),
        }
    }
}

/// Mark-to-market change over one step: the move in unrealized value plus
/// whatever was realized during the step. Summed over an episode that starts
/// and ends flat this equals the realized PnL.
pub fn positional_pnl(unrealized_before: f64, unrealized_after: f64, realized_step: f64) -> f64 {
    unrealized_after - unrealized_before + realized_step
}

/// Inventory-weighted midpoint return plus realized PnL, for lots whose mark
/// was the previous midpoint.
pub fn positional_pnl_from_midpoints(inventory: i64, mid_before: f64, mid_after: f64, realized_step: f64) -> f64 {
    (mid_after / mid_before - 1.0) * inventory as f64 + realized_step
}

/// Clipped realized PnL of the positions closed this step. Gains of at least
/// `epsilon * varpi` map to +1, losses of at least `varpi` to -1. Returns 0
/// when nothing was closed.
pub fn trade_completion(realized_step: Option<f64>, epsilon: f64, varpi: f64) -> f64 {
    match realized_step {
        None => 0.0,
        Some(r) if r >= epsilon * varpi => 1.0,
        Some(r) if r <= -varpi => -1.0,
        Some(r) => r,
    }
}
