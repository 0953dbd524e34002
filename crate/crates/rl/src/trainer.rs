//! Synchronous actor-critic training over several environment instances.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::loss::{self, LossBatch, LossCoefficients, LossStats, Objective};
use crate::network::{log_softmax, sample_categorical, Activation, NetConfig, PolicyValueNet};
use crate::optim::{clip_grad_norm, Adam};
use crate::rollout::{normalize, RolloutBuffer};
use crate::RlError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    A2c,
    Ppo,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::A2c => "a2c",
            AgentKind::Ppo => "ppo",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub agent: AgentKind,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Rollout length per environment; 40 for A2C and 256 for PPO if unset.
    pub n_steps: Option<usize>,
    pub n_envs: usize,
    /// Agent decisions summed over all environments.
    pub training_steps: u64,
    pub action_repeat: usize,
    pub clip_epsilon: f64,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Per-batch advantage standardization; on for PPO, off for A2C if unset.
    pub normalize_advantages: Option<bool>,
    pub shared_width: usize,
    pub head_width: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            agent: AgentKind::Ppo,
            gamma: 0.99,
            learning_rate: 3e-4,
            n_steps: None,
            n_envs: 4,
            training_steps: 10_000_000,
            action_repeat: 5,
            clip_epsilon: 0.2,
            ppo_epochs: 4,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: None,
            shared_width: 256,
            head_width: 128,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_agent(agent: AgentKind) -> Self {
        Self { agent, ..Self::default() }
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps.unwrap_or(match self.agent {
            AgentKind::A2c => 40,
            AgentKind::Ppo => 256,
        })
    }

    pub fn normalize_advantages(&self) -> bool {
        self.normalize_advantages.unwrap_or(self.agent == AgentKind::Ppo)
    }

    pub fn net_config(&self, input: usize, actions: usize) -> NetConfig {
        NetConfig { input, shared: self.shared_width, head: self.head_width, actions, activation: self.activation }
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            problems.push(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("clip_epsilon", self.clip_epsilon),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("value_coef", self.value_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("n_steps", self.n_steps()),
            ("n_envs", self.n_envs),
            ("action_repeat", self.action_repeat),
            ("ppo_epochs", self.ppo_epochs),
            ("minibatch_size", self.minibatch_size),
            ("shared_width", self.shared_width),
            ("head_width", self.head_width),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be at least 1"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// One line of the training log, written after every update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub update: u64,
    pub step: u64,
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub mean_reward: f64,
    pub episodes: u64,
    pub mean_episode_return: f64,
    pub mean_episode_pnl: f64,
}

impl MetricRow {
    pub const HEADER: &'static str = "update,step,loss,policy_loss,value_loss,entropy,clip_fraction,approx_kl,grad_norm,mean_reward,episodes,mean_episode_return,mean_episode_pnl";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
            self.update,
            self.step,
            self.loss,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.approx_kl,
            self.grad_norm,
            self.mean_reward,
            self.episodes,
            self.mean_episode_return,
            self.mean_episode_pnl
        )
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<(), RlError> {
    let io = |source| RlError::Io { path: path.display().to_string(), source };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "{}", MetricRow::HEADER).map_err(io)?;
    for r in rows {
        writeln!(f, "{}", r.csv()).map_err(io)?;
    }
    f.flush().map_err(io)
}

/// The learner's state: network, optimizer and sampling RNG.
#[derive(Clone, Debug)]
pub struct Learner {
    pub config: TrainConfig,
    pub net: PolicyValueNet,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
    pub step: u64,
    pub updates: u64,
}

impl Learner {
    pub fn new(config: TrainConfig, input: usize, actions: usize) -> Result<Self, RlError> {
        config.validate().map_err(|p| RlError::InvalidConfig(p.join("; ")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = PolicyValueNet::new(config.net_config(input, actions), &mut rng);
        let adam = Adam::new(net.parameter_count(), config.learning_rate);
        Ok(Self { config, net, adam, rng, step: 0, updates: 0 })
    }

    fn objective(&self) -> Objective {
        match self.config.agent {
            AgentKind::A2c => Objective::PolicyGradient,
            AgentKind::Ppo => Objective::ClippedSurrogate { epsilon: self.config.clip_epsilon },
        }
    }

    fn coefficients(&self) -> LossCoefficients {
        LossCoefficients { value: self.config.value_coef, entropy: self.config.entropy_coef }
    }

    /// One gradient step on the samples at `idx`.
    fn gradient_step(
        &mut self,
        buffer: &RolloutBuffer,
        idx: &[usize],
        returns: &[f64],
        advantages: &[f64],
    ) -> Result<(LossStats, f64), RlError> {
        let obs_len = buffer.obs_len;
        let mut obs = Vec::with_capacity(idx.len() * obs_len);
        for &i in idx {
            obs.extend_from_slice(&buffer.observations[i * obs_len..(i + 1) * obs_len]);
        }
        let x = ArrayView2::from_shape((idx.len(), obs_len), &obs).expect("batch shape");
        let cache = self.net.forward(x)?;
        let actions: Vec<usize> = idx.iter().map(|&i| buffer.actions[i]).collect();
        let adv: Vec<f64> = idx.iter().map(|&i| advantages[i]).collect();
        let ret: Vec<f64> = idx.iter().map(|&i| returns[i]).collect();
        let old: Vec<f64> = idx.iter().map(|&i| buffer.log_probs[i]).collect();
        let batch = LossBatch { actions: &actions, advantages: &adv, returns: &ret, old_log_probs: &old };
        let out = loss::compute(self.objective(), cache.logits.view(), cache.values.view(), &batch, self.coefficients());
        if !out.stats.total.is_finite() {
            return Err(RlError::NonFiniteLoss { update: self.updates });
        }
        let mut grad = self.net.backward(&cache, &out.d_logits, &out.d_values);
        let norm = clip_grad_norm(&mut grad, self.config.max_grad_norm);
        if !norm.is_finite() {
            return Err(RlError::NonFiniteGradient { update: self.updates, norm, loss: out.stats.total });
        }
        self.adam.update(self.net.params_mut(), grad.view());
        Ok((out.stats, norm))
    }

    /// Updates the network from a full rollout.
    pub fn update(&mut self, buffer: &RolloutBuffer, bootstrap: &[f64]) -> Result<MetricRow, RlError> {
        let (returns, mut advantages) = buffer.returns_and_advantages(bootstrap, self.config.gamma);
        if self.config.normalize_advantages() {
            normalize(&mut advantages);
        }
        let n = buffer.len();
        let mut all: Vec<usize> = (0..n).collect();
        let mut sum = LossStats::default();
        let mut norm_sum = 0.0;
        let mut steps = 0usize;
        match self.config.agent {
            AgentKind::A2c => {
                let (s, norm) = self.gradient_step(buffer, &all, &returns, &advantages)?;
                accumulate(&mut sum, &s);
                norm_sum += norm;
                steps += 1;
            }
            AgentKind::Ppo => {
                let mb = self.config.minibatch_size.min(n);
                for _ in 0..self.config.ppo_epochs {
                    all.shuffle(&mut self.rng);
                    for chunk in all.chunks(mb) {
                        let (s, norm) = self.gradient_step(buffer, chunk, &returns, &advantages)?;
                        accumulate(&mut sum, &s);
                        norm_sum += norm;
                        steps += 1;
                    }
                }
            }
        }
        self.updates += 1;
        let k = steps as f64;
        Ok(MetricRow {
            update: self.updates,
            step: self.step,
            loss: sum.total / k,
            policy_loss: sum.policy / k,
            value_loss: sum.value / k,
            entropy: sum.entropy / k,
            clip_fraction: sum.clip_fraction / k,
            approx_kl: sum.approx_kl / k,
            grad_norm: norm_sum / k,
            mean_reward: buffer.rewards.iter().sum::<f64>() / n as f64,
            ..MetricRow::default()
        })
    }

    /// Samples an action; returns (action, log-prob, value).
    pub fn act(&mut self, observation: &[f64]) -> Result<(usize, f64, f64), RlError> {
        let (logits, value) = self.net.forward_one(observation)?;
        let logp = log_softmax(ndarray::ArrayView1::from(&logits));
        let a = sample_categorical(logp.mapv(f64::exp).view(), &mut self.rng);
        Ok((a, logp[a], value))
    }
}

fn accumulate(into: &mut LossStats, s: &LossStats) {
    into.total += s.total;
    into.policy += s.policy;
    into.value += s.value;
    into.entropy += s.entropy;
    into.clip_fraction += s.clip_fraction;
    into.approx_kl += s.approx_kl;
}

/// Runs a learner against `n_envs` environments in lockstep.
pub struct Trainer<E: Environment> {
    pub learner: Learner,
    envs: Vec<E>,
    observations: Vec<Vec<f64>>,
    episode_returns: Vec<f64>,
    finished_returns: Vec<f64>,
    finished_pnls: Vec<f64>,
    pub metrics: Vec<MetricRow>,
}

impl<E: Environment> Trainer<E> {
    pub fn new(config: TrainConfig, envs: Vec<E>) -> Result<Self, RlError> {
        let first = envs.first().ok_or_else(|| RlError::InvalidConfig("no environments".into()))?;
        let learner = Learner::new(config, first.observation_len(), first.n_actions())?;
        Self::with_learner(learner, envs)
    }

    /// Continues from an existing learner, e.g. one restored from a checkpoint.
    pub fn with_learner(learner: Learner, mut envs: Vec<E>) -> Result<Self, RlError> {
        if envs.len() != learner.config.n_envs {
            return Err(RlError::InvalidConfig(format!(
                "config asks for {} environments, got {}",
                learner.config.n_envs,
                envs.len()
            )));
        }
        let cfg = learner.net.config();
        for env in &envs {
            if env.observation_len() != cfg.input || env.n_actions() != cfg.actions {
                return Err(RlError::InvalidConfig("environment does not match the network shape".into()));
            }
        }
        let observations = envs.iter_mut().map(|e| e.reset()).collect::<Result<Vec<_>, _>>()?;
        let n = envs.len();
        Ok(Self {
            learner,
            envs,
            observations,
            episode_returns: vec![0.0; n],
            finished_returns: Vec::new(),
            finished_pnls: Vec::new(),
            metrics: Vec::new(),
        })
    }

    pub fn envs(&self) -> &[E] {
        &self.envs
    }

    pub fn net(&self) -> &PolicyValueNet {
        &self.learner.net
    }

    fn collect(&mut self, n_steps: usize) -> Result<(RolloutBuffer, Vec<f64>), RlError> {
        let n_envs = self.envs.len();
        let obs_len = self.learner.net.config().input;
        let mut buffer = RolloutBuffer::new(n_envs, obs_len);
        let mut flat = vec![0.0; n_envs * obs_len];
        for _ in 0..n_steps {
            for (e, o) in self.observations.iter().enumerate() {
                flat[e * obs_len..(e + 1) * obs_len].copy_from_slice(o);
            }
            let cache = self.learner.net.forward(ArrayView2::from_shape((n_envs, obs_len), &flat).expect("shape"))?;
            for e in 0..n_envs {
                let logp = log_softmax(cache.logits.row(e));
                let a = sample_categorical(logp.mapv(f64::exp).view(), &mut self.learner.rng);
                let t = self.envs[e].step(a)?;
                buffer.push(&self.observations[e], a, logp[a], t.reward, cache.values[e], t.done);
                self.episode_returns[e] += t.reward;
                self.observations[e] = if t.done {
                    self.finished_returns.push(self.episode_returns[e]);
                    self.finished_pnls.push(t.pnl);
                    self.episode_returns[e] = 0.0;
                    self.envs[e].reset()?
                } else {
                    t.observation
                };
            }
            self.learner.step += n_envs as u64;
        }
        for (e, o) in self.observations.iter().enumerate() {
            flat[e * obs_len..(e + 1) * obs_len].copy_from_slice(o);
        }
        let boot = self.learner.net.forward(ArrayView2::from_shape((n_envs, obs_len), &flat).expect("shape"))?;
        Ok((buffer, boot.values.to_vec()))
    }

    /// Trains until `training_steps` decisions have been taken, calling
    /// `after_update` with each metric row.
    pub fn train_with<F>(&mut self, mut after_update: F) -> Result<(), RlError>
    where
        F: FnMut(&Learner, &MetricRow) -> Result<(), RlError>,
    {
        let n_steps = self.learner.config.n_steps();
        while self.learner.step < self.learner.config.training_steps {
            let (buffer, bootstrap) = self.collect(n_steps)?;
            let mut row = self.learner.update(&buffer, &bootstrap)?;
            let k = self.finished_returns.len();
            row.episodes = k as u64;
            if k > 0 {
                row.mean_episode_return = self.finished_returns.iter().sum::<f64>() / k as f64;
                row.mean_episode_pnl = self.finished_pnls.iter().sum::<f64>() / k as f64;
            }
            self.finished_returns.clear();
            self.finished_pnls.clear();
            after_update(&self.learner, &row)?;
            self.metrics.push(row);
        }
        Ok(())
    }

    pub fn train(&mut self) -> Result<(), RlError> {
        self.train_with(|_, _| Ok(()))
    }
}

/// Probability the policy assigns to each action for `observation`.
pub fn action_probabilities(net: &PolicyValueNet, observation: &[f64]) -> Result<Array1<f64>, RlError> {
    let (logits, _) = net.forward_one(observation)?;
    Ok(log_softmax(ndarray::ArrayView1::from(&logits)).mapv(f64::exp))
}
