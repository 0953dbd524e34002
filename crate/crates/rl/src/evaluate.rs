//! Policy rollouts on the market-making environment.

use mmsim_core::env::{ActionId, MarketMakingEnv};
use mmsim_core::report::{EpisodeRecorder, EpisodeReport, EpisodeTrace};
use ndarray::ArrayView1;
use rand::Rng;

use crate::network::{argmax, log_softmax, sample_categorical, PolicyValueNet};
use crate::RlError;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    Greedy,
    Sampled,
}

/// Chooses the action for each decision.
pub trait Policy {
    fn choose<R: Rng>(&self, observation: &[f64], rng: &mut R) -> Result<usize, RlError>;
}

pub struct NetPolicy<'a> {
    pub net: &'a PolicyValueNet,
    pub selection: Selection,
}

impl Policy for NetPolicy<'_> {
    fn choose<R: Rng>(&self, observation: &[f64], rng: &mut R) -> Result<usize, RlError> {
        let (logits, _) = self.net.forward_one(observation)?;
        let logits = ArrayView1::from(&logits);
        Ok(match self.selection {
            Selection::Greedy => argmax(logits),
            Selection::Sampled => sample_categorical(log_softmax(logits).mapv(f64::exp).view(), rng),
        })
    }
}

/// Uniformly random actions.
pub struct RandomPolicy {
    pub actions: usize,
}

impl Policy for RandomPolicy {
    fn choose<R: Rng>(&self, _: &[f64], rng: &mut R) -> Result<usize, RlError> {
        Ok(rng.random_range(0..self.actions))
    }
}

pub struct EvalLabels<'a> {
    pub agent: &'a str,
    pub reward: &'a str,
}

/// Plays one episode on `day`: each decision is followed by `repeat - 1`
/// no-op steps. Every environment step is recorded.
pub fn run_episode<P: Policy, R: Rng>(
    policy: &P,
    env: &mut MarketMakingEnv,
    day: usize,
    action_repeat: usize,
    rng: &mut R,
    labels: EvalLabels,
) -> Result<(EpisodeReport, EpisodeTrace), RlError> {
    let mut obs = env.reset_day(day)?.observation.data;
    let mut recorder = EpisodeRecorder::new();
    let repeat = action_repeat.max(1);
    'episode: loop {
        let choice = ActionId::from_index(policy.choose(&obs, rng)?).ok_or(RlError::InvalidConfig("policy action out of range".into()))?;
        for k in 0..repeat {
            let action = if k == 0 { choice } else { ActionId::NO_ACTION };
            let r = env.step(action)?;
            recorder.record(r.reward, &r.info);
            obs = r.observation.data;
            if r.done {
                break 'episode;
            }
        }
    }
    let account = env.account().expect("episode started");
    let pnls: Vec<f64> = account.closed_trades().iter().map(|c| c.pnl).collect();
    recorder.record_round_trips(&pnls);
    let market = &env.days()[day].market.dataset;
    Ok(recorder.finish(labels.agent, labels.reward, &market.instrument, &market.date))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetConfig;
    use mmsim_core::env::{EnvConfig, PreparedDay};
    use mmsim_core::oracles::{identity_normalizer, random_market_day};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> MarketMakingEnv {
        let cfg = EnvConfig { window: 3, ..EnvConfig::default() };
        let day = PreparedDay::new(random_market_day(4, 120, 0.5), identity_normalizer());
        MarketMakingEnv::new(cfg, vec![day], 0).unwrap()
    }

    #[test]
    fn uniform_net_produces_finite_report() {
        let mut env = env();
        let net = PolicyValueNet::zeros(NetConfig::new(env.observation_len(), 17));
        let policy = NetPolicy { net: &net, selection: Selection::Sampled };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let labels = EvalLabels { agent: "ppo", reward: "positional_pnl" };
        let (report, trace) = run_episode(&policy, &mut env, 0, 1, &mut rng, labels).unwrap();
        assert_eq!(report.steps, 119);
        assert!(report.total_pnl.is_finite() && report.max_drawdown.is_finite());
        assert_eq!(trace.equity.len(), 119);
    }

    #[test]
    fn action_repeat_changes_trajectory() {
        let mut env = env();
        let policy = RandomPolicy { actions: 17 };
        let mut runs = Vec::new();
        for repeat in [1, 5, 10] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let labels = EvalLabels { agent: "random", reward: "positional_pnl" };
            runs.push(run_episode(&policy, &mut env, 0, repeat, &mut rng, labels).unwrap().1);
        }
        assert_ne!(runs[0], runs[1]);
        assert_ne!(runs[1], runs[2]);
    }
}
