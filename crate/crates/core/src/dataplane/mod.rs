//! Switch fabric simulator: flow tables, links, engine redirection and
//! traffic counters, driven by a deterministic event queue.

mod fabric;
mod packet;
mod queue;
mod table;

use thiserror::Error;

pub use fabric::{Delivery, DropCause, Fabric, FabricState, PacketCounters, StatsReport, SwitchStats, TraceEntry};
pub use packet::PacketRecord;
pub use queue::EventQueue;
pub use table::{FlowEntry, FlowTable};

use crate::epb::EpbError;

#[derive(Debug, Error)]
pub enum DataplaneError {
    #[error("unknown switch {0}")]
    UnknownSwitch(String),
    #[error("unknown or non-injectable node {0}")]
    UnknownNode(String),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Engine(EpbError),
}
