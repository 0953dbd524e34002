//! Policy/value networks and actor-critic training (A2C and PPO with a
//! clipped surrogate) for discrete-action environments.
//!
//! The network, its gradients and the optimizer are implemented directly on
//! `ndarray`; training runs several environment instances in lockstep and
//! applies synchronous updates.

pub mod checkpoint;
pub mod env;
pub mod evaluate;
pub mod loss;
pub mod network;
pub mod optim;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod rollout;
pub mod trainer;

use thiserror::Error;

pub use env::{ActionRepeat, Bandit, Environment, Transition};
pub use network::{Activation, NetConfig, PolicyValueNet};
pub use trainer::{AgentKind, MetricRow, TrainConfig, Trainer};

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Env(#[from] mmsim_core::env::EnvError),
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error("non-finite gradient at update {update} (norm {norm}, loss {loss})")]
    NonFiniteGradient { update: u64, norm: f64, loss: f64 },
    #[error("non-finite loss at update {update}")]
    NonFiniteLoss { update: u64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
