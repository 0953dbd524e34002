//! Rollout storage and n-step return targets.

/// Transitions from `n_envs` environments over `n_steps` steps, stored
/// step-major: index `t * n_envs + e`.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub obs_len: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, obs_len: usize) -> Self {
        Self { n_envs, obs_len, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len() / self.n_envs.max(1)
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.dones.clear();
    }

    pub fn push(&mut self, observation: &[f64], action: usize, log_prob: f64, reward: f64, value: f64, done: bool) {
        debug_assert_eq!(observation.len(), self.obs_len);
        self.observations.extend_from_slice(observation);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    /// Discounted n-step returns and advantages for every stored step, each
    /// environment bootstrapped from `bootstrap[e]`.
    pub fn returns_and_advantages(&self, bootstrap: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_steps();
        let mut returns = vec![0.0; self.len()];
        for (e, &boot) in bootstrap.iter().enumerate().take(self.n_envs) {
            let idx: Vec<usize> = (0..n).map(|t| t * self.n_envs + e).collect();
            let rewards: Vec<f64> = idx.iter().map(|&i| self.rewards[i]).collect();
            let dones: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            for (r, &i) in n_step_returns(&rewards, &dones, boot, gamma).into_iter().zip(&idx) {
                returns[i] = r;
            }
        }
        let advantages = returns.iter().zip(&self.values).map(|(r, v)| r - v).collect();
        (returns, advantages)
    }
}

/// `R_t = r_t + gamma * (1 - done_t) * R_{t+1}` with `R_n = bootstrap`.
pub fn n_step_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        next = rewards[t] + if dones[t] { 0.0 } else { gamma * next };
        out[t] = next;
    }
    out
}

/// Standardizes to zero mean and unit (population) deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.len() < 2 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rewards_zero_values() {
        let r = n_step_returns(&[0.0; 5], &[false; 5], 0.0, 0.99);
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_step() {
        assert_eq!(n_step_returns(&[1.0], &[false], 0.0, 0.99), vec![1.0]);
    }

    #[test]
    fn done_cuts_bootstrap() {
        let r = n_step_returns(&[1.0, 2.0], &[true, false], 10.0, 0.5);
        assert_eq!(r, vec![1.0, 7.0]);
    }

    #[test]
    fn buffer_interleaves_environments() {
        let mut b = RolloutBuffer::new(2, 1);
        for t in 0..3 {
            b.push(&[0.0], 0, 0.0, t as f64, 0.0, false);
            b.push(&[0.0], 0, 0.0, 1.0, 0.5, t == 1);
        }
        let (ret, adv) = b.returns_and_advantages(&[0.0, 2.0], 1.0);
        assert_eq!(ret[0], 3.0);
        assert_eq!(ret[1], 2.0);
        assert_eq!(ret[5], 3.0);
        assert_eq!(adv[1], 1.5);
    }

    #[test]
    fn normalization() {
        let mut v = vec![1.0, 2.0, 3.0];
        normalize(&mut v);
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
        assert!((v.iter().map(|x| x * x).sum::<f64>() / 3.0 - 1.0).abs() < 1e-6);
    }
}
