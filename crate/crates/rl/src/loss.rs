//! Actor-critic and clipped-surrogate objectives with their gradients at
//! the network outputs. Advantages and returns are constants.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::network::log_softmax;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficients {
    pub value: f64,
    pub entropy: f64,
}

impl Default for LossCoefficients {
    fn default() -> Self {
        Self { value: 0.5, entropy: 0.01 }
    }
}

/// Training targets for one minibatch.
#[derive(Copy, Clone, Debug)]
pub struct LossBatch<'a> {
    pub actions: &'a [usize],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
    /// Log-probabilities of `actions` under the policy that collected them.
    pub old_log_probs: &'a [f64],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Share of samples whose ratio left the clip range (PPO only).
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Loss value plus its gradient with respect to logits and values.
#[derive(Clone, Debug)]
pub struct LossOutput {
    pub stats: LossStats,
    pub d_logits: Array2<f64>,
    pub d_values: Array1<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// `-log pi(a|s) * A`.
    PolicyGradient,
    /// `-min(r * A, clip(r, 1 - eps, 1 + eps) * A)` with `r = pi / pi_old`.
    ClippedSurrogate { epsilon: f64 },
}

/// Mean over the batch of the policy term, `value * (R - V)^2` and
/// `-entropy * H`.
pub fn compute(
    objective: Objective,
    logits: ArrayView2<f64>,
    values: ArrayView1<f64>,
    batch: &LossBatch,
    coef: LossCoefficients,
) -> LossOutput {
    let (n, k) = logits.dim();
    let scale = 1.0 / n as f64;
    let mut d_logits = Array2::zeros((n, k));
    let mut d_values = Array1::zeros(n);
    let mut stats = LossStats::default();
    for i in 0..n {
        let logp = log_softmax(logits.row(i));
        let p = logp.mapv(f64::exp);
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let entropy = -p.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();

        // d(policy term)/d(log pi(a)).
        let (policy, d_logp) = match objective {
            Objective::PolicyGradient => (-logp[a] * adv, -adv),
            Objective::ClippedSurrogate { epsilon } => {
                let log_ratio = logp[a] - batch.old_log_probs[i];
                let ratio = log_ratio.exp();
                let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
                let unclipped_term = ratio * adv;
                let clipped_term = clipped * adv;
                if (ratio - 1.0).abs() > epsilon {
                    stats.clip_fraction += scale;
                }
                stats.approx_kl += scale * ((ratio - 1.0) - log_ratio);
                if unclipped_term <= clipped_term {
                    (-unclipped_term, -unclipped_term)
                } else {
                    (-clipped_term, 0.0)
                }
            }
        };
        let err = batch.returns[i] - values[i];
        stats.policy += scale * policy;
        stats.value += scale * err * err;
        stats.entropy += scale * entropy;

        // d log pi(a) / dz_j = 1[j = a] - p_j;  dH/dz_j = -p_j (log p_j + H).
        for j in 0..k {
            let indicator = if j == a { 1.0 } else { 0.0 };
            let d_entropy = -p[j] * (logp[j] + entropy);
            d_logits[[i, j]] = scale * (d_logp * (indicator - p[j]) - coef.entropy * d_entropy);
        }
        d_values[i] = -2.0 * coef.value * scale * err;
    }
    stats.total = stats.policy + coef.value * stats.value - coef.entropy * stats.entropy;
    LossOutput { stats, d_logits, d_values }
}
