use thiserror::Error;

/// Errors raised across the simulator, reward, training and benchmark layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation blew up at physics step {step}: {detail}")]
    SimulationBlowup { step: u64, detail: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
