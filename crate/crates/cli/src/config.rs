//! Run configuration: one flat TOML table covering data, environment and
//! training settings. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use mmsim_core::env::{EnvConfig, RewardKind};
use mmsim_core::pipeline::ReplayConfig;
use mmsim_rl::{Activation, AgentKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_OUTPUT_DIR: &str = "MMSIM_OUTPUT_DIR";
pub const ENV_SEED: &str = "MMSIM_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Expected instrument; every dataset must match when set.
    pub instrument: Option<String>,
    /// Tick files used for training episodes.
    pub train_data: Vec<PathBuf>,
    /// Day the feature normalizer is fitted on; the first training day if unset.
    pub normalizer_data: Option<PathBuf>,
    pub snapshot_interval_ms: u64,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Updates between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    /// Checkpoint to continue training from.
    pub resume: Option<PathBuf>,

    pub agent: AgentKind,
    pub reward: RewardKind,
    pub rho: f64,
    pub epsilon: f64,
    pub varpi: f64,
    pub market_fee: f64,
    pub max_positions: i64,
    pub window: usize,
    pub feature_width: usize,
    pub lot_size: f64,
    pub ruin_threshold: f64,

    pub gamma: f64,
    pub learning_rate: f64,
    pub n_steps: Option<usize>,
    pub n_envs: usize,
    pub training_steps: u64,
    pub action_repeat: usize,
    pub clip_epsilon: f64,
    pub ppo_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: Option<bool>,
    pub shared_width: usize,
    pub head_width: usize,
    pub activation: Activation,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        let train = TrainConfig::default();
        Self {
            instrument: None,
            train_data: Vec::new(),
            normalizer_data: None,
            snapshot_interval_ms: 1000,
            output_dir: PathBuf::from("runs/default"),
            seed: 0,
            checkpoint_every: 100,
            resume: None,
            agent: train.agent,
            reward: env.reward,
            rho: env.rho,
            epsilon: env.epsilon,
            varpi: env.varpi,
            market_fee: env.market_fee,
            max_positions: env.max_positions,
            window: env.window,
            feature_width: env.feature_width,
            lot_size: env.lot_size,
            ruin_threshold: env.ruin_threshold,
            gamma: train.gamma,
            learning_rate: train.learning_rate,
            n_steps: train.n_steps,
            n_envs: train.n_envs,
            training_steps: train.training_steps,
            action_repeat: train.action_repeat,
            clip_epsilon: train.clip_epsilon,
            ppo_epochs: train.ppo_epochs,
            minibatch_size: train.minibatch_size,
            entropy_coef: train.entropy_coef,
            value_coef: train.value_coef,
            max_grad_norm: train.max_grad_norm,
            normalize_advantages: train.normalize_advantages,
            shared_width: train.shared_width,
            head_width: train.head_width,
            activation: train.activation,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Reads `path`, applies `MMSIM_OUTPUT_DIR` / `MMSIM_SEED` and resolves
    /// relative paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::load_with(path, |key| std::env::var(key).ok())
    }

    pub fn load_with(path: &Path, var: impl Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_overrides(var)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(dir) = var(ENV_OUTPUT_DIR).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        if let Some(seed) = var(ENV_SEED).filter(|s| !s.is_empty()) {
            self.seed = seed
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{ENV_SEED} must be an unsigned integer, got {seed:?}")))?;
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.train_data.iter_mut().for_each(fix);
        self.normalizer_data.iter_mut().for_each(fix);
        self.resume.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            reward: self.reward,
            rho: self.rho,
            epsilon: self.epsilon,
            varpi: self.varpi,
            market_fee: self.market_fee,
            max_positions: self.max_positions,
            window: self.window,
            feature_width: self.feature_width,
            lot_size: self.lot_size,
            ruin_threshold: self.ruin_threshold,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            agent: self.agent,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            n_steps: self.n_steps,
            n_envs: self.n_envs,
            training_steps: self.training_steps,
            action_repeat: self.action_repeat,
            clip_epsilon: self.clip_epsilon,
            ppo_epochs: self.ppo_epochs,
            minibatch_size: self.minibatch_size,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            max_grad_norm: self.max_grad_norm,
            normalize_advantages: self.normalize_advantages,
            shared_width: self.shared_width,
            head_width: self.head_width,
            activation: self.activation,
            seed: self.seed,
        }
    }

    pub fn replay_config(&self) -> ReplayConfig {
        ReplayConfig { interval_ns: self.snapshot_interval_ms as i64 * 1_000_000, ..ReplayConfig::default() }
    }

    /// Every problem with the configuration, including the environment and
    /// trainer checks.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        if self.train_data.is_empty() {
            problems.push("train_data must list at least one tick file".to_string());
        }
        if self.snapshot_interval_ms == 0 {
            problems.push("snapshot_interval_ms must be at least 1".to_string());
        }
        if self.snapshot_interval_ms > i64::MAX as u64 / 1_000_000 {
            problems.push(format!("snapshot_interval_ms {} is too large", self.snapshot_interval_ms));
        }
        if let Some(name) = &self.instrument {
            if name.is_empty() {
                problems.push("instrument must not be empty when set".to_string());
            }
        }
        if let Err(p) = self.env_config().validate() {
            problems.extend(p);
        }
        if let Err(p) = self.train_config().validate() {
            problems.extend(p);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.gamma, 0.99);
        assert_eq!(cfg.learning_rate, 3e-4);
        assert_eq!(cfg.training_steps, 10_000_000);
        assert_eq!(cfg.action_repeat, 5);
        assert_eq!(cfg.train_config(), TrainConfig::default());
        assert_eq!(cfg.env_config(), EnvConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("gama = 0.9").unwrap_err();
        assert!(err.to_string().contains("gama"), "{err}");
    }

    #[test]
    fn enums_parse_from_names() {
        let cfg = RunConfig::parse("agent = \"a2c\"\nreward = \"trade_completion\"\nactivation = \"relu\"").unwrap();
        assert_eq!(cfg.agent, AgentKind::A2c);
        assert_eq!(cfg.reward, RewardKind::TradeCompletion);
        assert_eq!(cfg.activation, Activation::Relu);
        let cfg = RunConfig::parse("reward = \"positional\"").unwrap();
        assert_eq!(cfg.reward, RewardKind::PositionalPnl);
    }

    #[test]
    fn validation_lists_every_problem() {
        let cfg = RunConfig::parse("gamma = 1.5\nn_envs = 0\nmax_positions = 0\nwindow = 0").unwrap();
        let CliError::Config(problems) = cfg.validate().unwrap_err() else { panic!("expected config error") };
        assert!(problems.len() >= 5, "{problems:?}");
        for key in ["train_data", "gamma", "n_envs", "max_positions", "window"] {
            assert!(problems.iter().any(|p| p.contains(key)), "{key} missing from {problems:?}");
        }
    }

    #[test]
    fn environment_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_overrides(|k| match k {
            ENV_OUTPUT_DIR => Some("/tmp/x".into()),
            ENV_SEED => Some("42".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.seed, 42);
        let err = cfg.apply_overrides(|k| (k == ENV_SEED).then(|| "abc".to_string())).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let mut cfg = RunConfig { train_data: vec!["day.ticks".into()], ..RunConfig::default() };
        cfg.resolve_paths(Path::new("/data/run"));
        assert_eq!(cfg.train_data[0], PathBuf::from("/data/run/day.ticks"));
        assert_eq!(cfg.output_dir, PathBuf::from("/data/run/runs/default"));
    }
}
