use serde::Serialize;

use crate::epb::Payload;
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketRecord<T> {
    /// Assigned by the fabric when the packet enters it.
    pub id: u64,
    pub source: NodeId,
    pub final_destination: NodeId,
    pub user: String,
    pub epoch: u64,
    /// Sampling time at the source, or the latest input sample for engine
    /// output.
    pub timestamp_ms: f64,
    pub payload: Payload<T>,
    /// Switch lookups so far.
    pub hop_count: u32,
}

impl<T> PacketRecord<T> {
    pub fn new(
        source: NodeId,
        final_destination: NodeId,
        user: &str,
        epoch: u64,
        timestamp_ms: f64,
        payload: Payload<T>,
    ) -> Self {
        PacketRecord {
            id: 0,
            source,
            final_destination,
            user: user.to_owned(),
            epoch,
            timestamp_ms,
            payload,
            hop_count: 0,
        }
    }
}
