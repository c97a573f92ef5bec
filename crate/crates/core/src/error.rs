use thiserror::Error;

use crate::clock::ClockError;
use crate::types::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("clock error: {0}")]
    Clock(#[from] ClockError),

    #[error("unregistered node {0}")]
    UnknownNode(NodeId),

    #[error("clients may not message each other ({src} -> {dst})")]
    ClientToClient { src: NodeId, dst: NodeId },

    #[error("timer period must be positive")]
    ZeroPeriod,

    #[error("liveness failure: {pending} client operation(s) still pending at {limit_us} us")]
    Liveness { pending: usize, limit_us: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("wire format error: {0}")]
    Wire(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
