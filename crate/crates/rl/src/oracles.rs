//! Reference computations for tests: finite differences and brute-force
//! discounted sums. Enabled by the `oracles` feature.

use ndarray::Array1;

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(|a| + |n|, floor)` over all components.
pub fn max_relative_error(analytic: &Array1<f64>, numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// `sum_{i<k} gamma^i r_{t+i} + gamma^k V(s_{t+k}) - V(s_t)` for every `t`,
/// summing explicitly from each start and stopping after a terminal step.
pub fn brute_force_advantages(rewards: &[f64], dones: &[bool], values: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut total = 0.0;
            let mut discount = 1.0;
            let mut terminal = false;
            for i in t..n {
                total += discount * rewards[i];
                discount *= gamma;
                if dones[i] {
                    terminal = true;
                    break;
                }
            }
            if !terminal {
                total += discount * bootstrap;
            }
            total - values[t]
        })
        .collect()
}

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Bandit;
use crate::loss::{self, LossBatch, LossCoefficients, Objective};
use crate::network::{log_softmax, Activation, NetConfig, PolicyValueNet};
use crate::trainer::{action_probabilities, AgentKind, TrainConfig, Trainer};

/// Compares backpropagated loss gradients of a small random network against
/// central differences and returns the worst relative error.
pub fn gradient_check(objective: Objective, activation: Activation, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = NetConfig { input: 4, shared: 6, head: 5, actions: 3, activation };
    let net = PolicyValueNet::new(cfg.clone(), &mut rng);
    let n = 5;
    let obs: Vec<f64> = (0..n * cfg.input).map(|_| rng.random_range(-1.0..1.0)).collect();
    let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.actions)).collect();
    let advantages: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let returns: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = ArrayView2::from_shape((n, cfg.input), &obs).expect("shape");
    let cache = net.forward(x).expect("shape");
    // Ratios of 1.65, 1, 0.95, 0.61 and 1.3 keep every sample away from
    // the clip boundaries, where the objective has kinks.
    let offsets = [-0.5, 0.0, 0.05, 0.5, -0.26];
    let old: Vec<f64> = (0..n).map(|i| log_softmax(cache.logits.row(i))[actions[i]] + offsets[i]).collect();
    let batch = LossBatch { actions: &actions, advantages: &advantages, returns: &returns, old_log_probs: &old };
    let coef = LossCoefficients { value: 0.5, entropy: 0.01 };
    let out = loss::compute(objective, cache.logits.view(), cache.values.view(), &batch, coef);
    let analytic = net.backward(&cache, &out.d_logits, &out.d_values);
    let params = net.params().to_vec();
    let numeric = finite_difference(&params, 1e-5, |p| {
        let probe = PolicyValueNet::from_params(cfg.clone(), p.to_vec()).expect("same size");
        let c = probe.forward(x).expect("shape");
        loss::compute(objective, c.logits.view(), c.values.view(), &batch, coef).stats.total
    });
    max_relative_error(&analytic, &numeric, 1e-6)
}

/// Trains on a two-armed bandit whose second arm pays and returns the
/// final probability of pulling it.
pub fn bandit_paying_probability(agent: AgentKind, steps: u64, seed: u64) -> f64 {
    let cfg = TrainConfig { agent, training_steps: steps, seed, ..TrainConfig::default() };
    let envs = (0..cfg.n_envs).map(|_| Bandit { arms: 2, paying_arm: 1 }).collect();
    let mut trainer = Trainer::new(cfg, envs).expect("valid config");
    trainer.train().expect("bandit training");
    action_probabilities(trainer.net(), &[1.0]).expect("shape")[1]
}

/// Clipped-surrogate loss recomputed one sample at a time with scalar
/// arithmetic.
pub fn scalar_ppo_loss(
    logits: &[Vec<f64>],
    values: &[f64],
    batch: &LossBatch,
    epsilon: f64,
    coef: LossCoefficients,
) -> f64 {
    let n = logits.len() as f64;
    let mut total = 0.0;
    for (i, row) in logits.iter().enumerate() {
        let z: f64 = row.iter().map(|l| l.exp()).sum();
        let probs: Vec<f64> = row.iter().map(|l| l.exp() / z).collect();
        let ratio = probs[batch.actions[i]] / batch.old_log_probs[i].exp();
        let a = batch.advantages[i];
        let surrogate = (ratio * a).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * a);
        let entropy: f64 = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
        let err = batch.returns[i] - values[i];
        total += -surrogate + coef.value * err * err - coef.entropy * entropy;
    }
    total / n
}
