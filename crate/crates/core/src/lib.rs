//! Planner and deterministic simulator for in-network IoT aggregation.
//!
//! The numeric core is generic over the sensor value type; the aliases below
//! fix it to `f64` or to exact rationals.

pub mod control;
pub mod dataplane;
pub mod dsl;
pub mod epb;
pub mod graph;
pub mod harness;
pub mod op;
pub mod planner;
pub mod scalar;
pub mod topology;

pub use num_rational::BigRational;

pub use dsl::{parse_request, CoverageMap, Request};
pub use op::OpKind;
pub use planner::{plan, plan_baseline, DatapathPlan};
pub use topology::{NodeId, Topology};

pub type Payload = epb::Payload<f64>;
pub type ExactPayload = epb::Payload<BigRational>;
pub type Packet = dataplane::PacketRecord<f64>;
pub type ExactPacket = dataplane::PacketRecord<BigRational>;
pub type Engine = epb::Engine<f64>;
pub type ExactEngine = epb::Engine<BigRational>;
pub type Fabric = dataplane::Fabric<f64>;
pub type ExactFabric = dataplane::Fabric<BigRational>;
