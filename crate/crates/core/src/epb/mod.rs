//! Engine configuration and the per-engine processing pipeline:
//! rate filter, de-jitter buffer, epoch aggregation, compute.

mod config;
mod engine;
mod payload;

use thiserror::Error;

pub use config::{ConfigStore, EngineConfig, TimeoutPolicy, CONFIG_DIR_ENV, CONFIG_FILE_NAME};
pub use engine::{
    aggregate_and_compute, dejitter, rate_filter, Engine, EngineCounters, EpochBuffer, JitterVerdict, Outcome,
    RateFilter, RateVerdict, Timer, DEFAULT_TIMEOUT_MS,
};
pub use payload::Payload;

use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum EpbError {
    #[error("invalid engine config: {0}")]
    Validation(String),
    #[error("payload shapes differ")]
    ShapeMismatch,
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("no operands")]
    NoOperands,
    #[error("epoch closed without source {0}")]
    MissingSource(NodeId),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for EpbError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
