use mmsim_core::env::EnvError;
use mmsim_core::pipeline::PipelineError;
use mmsim_rl::RlError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Data(#[from] PipelineError),
    #[error("incompatible checkpoint {path}: {message}")]
    IncompatibleCheckpoint { path: String, message: String },
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(vec![message.into()])
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::IncompatibleCheckpoint { .. } | CliError::Input { .. } => EXIT_DATA,
            CliError::Rl(RlError::Checkpoint { .. }) => EXIT_DATA,
            CliError::Rl(RlError::InvalidConfig(_)) => EXIT_CONFIG,
            CliError::Rl(_) | CliError::Env(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}
