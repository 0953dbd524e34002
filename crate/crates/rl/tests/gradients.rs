use mmsim_rl::loss::{self, LossBatch, LossCoefficients, Objective};
use mmsim_rl::network::Activation;
use mmsim_rl::oracles::{brute_force_advantages, gradient_check, scalar_ppo_loss};
use mmsim_rl::rollout::n_step_returns;
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn a2c_gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = gradient_check(Objective::PolicyGradient, Activation::Tanh, seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn ppo_gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = gradient_check(Objective::ClippedSurrogate { epsilon: 0.2 }, Activation::Tanh, seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn relu_gradients_match_finite_differences() {
    let err = gradient_check(Objective::PolicyGradient, Activation::Relu, 1);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn three_step_advantage() {
    let gamma: f64 = 0.99;
    let returns = n_step_returns(&[1.0, 0.0, 1.0], &[false; 3], 0.5, gamma);
    let expected = 1.0 + 0.0 + gamma * gamma + gamma.powi(3) * 0.5 - 0.2;
    assert!((returns[0] - 0.2 - expected).abs() < 1e-12);
    let oracle = brute_force_advantages(&[1.0, 0.0, 1.0], &[false; 3], &[0.2, 0.0, 0.0], 0.5, gamma);
    assert!((oracle[0] - expected).abs() < 1e-12);
}

proptest! {
    #[test]
    fn returns_match_brute_force(
        steps in prop::collection::vec((-2.0f64..2.0, any::<bool>(), -1.0f64..1.0), 1..50),
        bootstrap in -1.0f64..1.0,
        gamma in 0.5f64..1.0,
    ) {
        let rewards: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.1).collect();
        let values: Vec<f64> = steps.iter().map(|s| s.2).collect();
        let returns = n_step_returns(&rewards, &dones, bootstrap, gamma);
        let oracle = brute_force_advantages(&rewards, &dones, &values, bootstrap, gamma);
        for t in 0..rewards.len() {
            prop_assert!((returns[t] - values[t] - oracle[t]).abs() < 1e-9);
        }
    }

    #[test]
    fn ppo_loss_matches_scalar_recomputation(
        rows in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 4), 0usize..4, -1.0f64..1.0, -1.0f64..1.0, -0.7f64..0.7, -1.0f64..1.0), 1..12),
    ) {
        let n = rows.len();
        let logits: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let actions: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let adv: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let ret: Vec<f64> = rows.iter().map(|r| r.3).collect();
        let values: Vec<f64> = rows.iter().map(|r| r.5).collect();
        let old: Vec<f64> = rows
            .iter()
            .map(|r| {
                let z: f64 = r.0.iter().map(|l| l.exp()).sum();
                (r.0[r.1].exp() / z).ln() + r.4
            })
            .collect();
        let batch = LossBatch { actions: &actions, advantages: &adv, returns: &ret, old_log_probs: &old };
        let coef = LossCoefficients::default();
        let flat = Array2::from_shape_vec((n, 4), logits.iter().flatten().copied().collect()).unwrap();
        let v = ndarray::Array1::from(values.clone());
        let fast = loss::compute(Objective::ClippedSurrogate { epsilon: 0.2 }, flat.view(), v.view(), &batch, coef);
        let slow = scalar_ppo_loss(&logits, &values, &batch, 0.2, coef);
        prop_assert!((fast.stats.total - slow).abs() < 1e-12);
    }
}
