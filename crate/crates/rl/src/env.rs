//! Environment interface used by the trainers, plus wrappers.

use mmsim_core::env::{ActionId, MarketMakingEnv};

use crate::RlError;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Total PnL after the step, for environments that track one.
    pub pnl: f64,
}

pub trait Environment {
    fn observation_len(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Action that leaves the agent's state unchanged, if there is one.
    fn noop_action(&self) -> Option<usize> {
        None
    }
    fn reset(&mut self) -> Result<Vec<f64>, RlError>;
    fn step(&mut self, action: usize) -> Result<Transition, RlError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn observation_len(&self) -> usize {
        (**self).observation_len()
    }
    fn n_actions(&self) -> usize {
        (**self).n_actions()
    }
    fn noop_action(&self) -> Option<usize> {
        (**self).noop_action()
    }
    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        (**self).reset()
    }
    fn step(&mut self, action: usize) -> Result<Transition, RlError> {
        (**self).step(action)
    }
}

impl Environment for MarketMakingEnv {
    fn observation_len(&self) -> usize {
        MarketMakingEnv::observation_len(self)
    }

    fn n_actions(&self) -> usize {
        mmsim_core::env::N_ACTIONS
    }

    fn noop_action(&self) -> Option<usize> {
        Some(ActionId::NO_ACTION.index())
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        Ok(MarketMakingEnv::reset(self)?.observation.data)
    }

    fn step(&mut self, action: usize) -> Result<Transition, RlError> {
        let r = self.step_index(action)?;
        Ok(Transition { observation: r.observation.data, reward: r.reward, done: r.done, pnl: r.info.total_pnl })
    }
}

/// Performs the chosen action once, then the no-op for the remaining
/// `repeat - 1` steps, summing rewards. Stops early at episode end.
#[derive(Clone, Debug)]
pub struct ActionRepeat<E> {
    pub inner: E,
    pub repeat: usize,
}

impl<E: Environment> ActionRepeat<E> {
    pub fn new(inner: E, repeat: usize) -> Self {
        Self { inner, repeat: repeat.max(1) }
    }
}

impl<E: Environment> Environment for ActionRepeat<E> {
    fn observation_len(&self) -> usize {
        self.inner.observation_len()
    }

    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    fn noop_action(&self) -> Option<usize> {
        self.inner.noop_action()
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        self.inner.reset()
    }

    fn step(&mut self, action: usize) -> Result<Transition, RlError> {
        let mut t = self.inner.step(action)?;
        let follow = self.inner.noop_action().unwrap_or(action);
        for _ in 1..self.repeat {
            if t.done {
                break;
            }
            let next = self.inner.step(follow)?;
            t = Transition { reward: t.reward + next.reward, ..next };
        }
        Ok(t)
    }
}

/// One-step bandit with a constant observation. Pulling `paying_arm` pays
/// +1, every other arm pays 0.
#[derive(Clone, Debug)]
pub struct Bandit {
    pub arms: usize,
    pub paying_arm: usize,
}

impl Environment for Bandit {
    fn observation_len(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.arms
    }

    fn reset(&mut self) -> Result<Vec<f64>, RlError> {
        Ok(vec![1.0])
    }

    fn step(&mut self, action: usize) -> Result<Transition, RlError> {
        let reward = if action == self.paying_arm { 1.0 } else { 0.0 };
        Ok(Transition { observation: vec![1.0], reward, done: true, pnl: reward })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts steps; reward is the action index; ends after `len` steps.
    struct Counter {
        t: usize,
        len: usize,
        actions: Vec<usize>,
    }

    impl Environment for Counter {
        fn observation_len(&self) -> usize {
            1
        }
        fn n_actions(&self) -> usize {
            3
        }
        fn noop_action(&self) -> Option<usize> {
            Some(0)
        }
        fn reset(&mut self) -> Result<Vec<f64>, RlError> {
            self.t = 0;
            Ok(vec![0.0])
        }
        fn step(&mut self, action: usize) -> Result<Transition, RlError> {
            self.t += 1;
            self.actions.push(action);
            Ok(Transition { observation: vec![self.t as f64], reward: 1.0 + action as f64, done: self.t >= self.len, pnl: 0.0 })
        }
    }

    #[test]
    fn repeat_acts_once_then_noops() {
        let mut env = ActionRepeat::new(Counter { t: 0, len: 7, actions: vec![] }, 3);
        env.reset().unwrap();
        let t = env.step(2).unwrap();
        assert_eq!(t.reward, 3.0 + 1.0 + 1.0);
        assert_eq!(t.observation, vec![3.0]);
        assert_eq!(env.inner.actions, vec![2, 0, 0]);
        env.step(1).unwrap();
        let t = env.step(1).unwrap();
        assert!(t.done);
        assert_eq!(t.reward, 2.0);
        assert_eq!(env.inner.actions.len(), 7);
    }

    #[test]
    fn bandit_pays_one_arm() {
        let mut b = Bandit { arms: 2, paying_arm: 1 };
        assert_eq!(b.step(1).unwrap().reward, 1.0);
        assert_eq!(b.step(0).unwrap().reward, 0.0);
        assert!(b.step(0).unwrap().done);
    }
}
