use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{EngineConfig, EpbError, Payload, TimeoutPolicy};
use crate::dataplane::PacketRecord;
use crate::scalar::Scalar;
use crate::topology::NodeId;

/// Epoch timeout when a config sets no rate.
pub const DEFAULT_TIMEOUT_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateVerdict {
    Pass,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JitterVerdict {
    Accept,
    Discard,
}

/// Last rate window that passed a packet, per source.
#[derive(Debug, Clone, Default)]
pub struct RateFilter {
    last_window: BTreeMap<NodeId, i64>,
}

/// Passes the first packet of each `floor(timestamp / rate)` window per
/// source.
pub fn rate_filter<T>(state: &mut RateFilter, cfg: &EngineConfig, p: &PacketRecord<T>) -> RateVerdict {
    let Some(rate) = cfg.rate_ms else {
        return RateVerdict::Pass;
    };
    let window = (p.timestamp_ms / rate).floor() as i64;
    match state.last_window.get(&p.source) {
        Some(&w) if w >= window => RateVerdict::Drop,
        _ => {
            state.last_window.insert(p.source.clone(), window);
            RateVerdict::Pass
        }
    }
}

/// Arrivals for one epoch of one config. The first arrival leads.
#[derive(Debug, Clone)]
pub struct EpochBuffer<T> {
    pub epoch: u64,
    pub arrivals: BTreeMap<NodeId, (f64, Payload<T>)>,
    pub leader_timestamp_ms: f64,
}

impl<T> EpochBuffer<T> {
    pub fn new(epoch: u64, leader_timestamp_ms: f64) -> Self {
        EpochBuffer {
            epoch,
            arrivals: BTreeMap::new(),
            leader_timestamp_ms,
        }
    }
}

/// Accepts arrivals within `jitter_ms` of the leader, inclusive.
pub fn dejitter<T>(buf: &EpochBuffer<T>, cfg: &EngineConfig, p: &PacketRecord<T>) -> JitterVerdict {
    match cfg.jitter_ms {
        Some(j) if (p.timestamp_ms - buf.leader_timestamp_ms).abs() > j => JitterVerdict::Discard,
        _ => JitterVerdict::Accept,
    }
}

/// Combines the buffered payloads in `cfg.sources` order. Without
/// `partial`, returns `None` until every source is present.
pub fn aggregate_and_compute<T: Scalar>(
    buf: &EpochBuffer<T>,
    cfg: &EngineConfig,
    partial: bool,
) -> Result<Option<PacketRecord<T>>, EpbError> {
    let present: Vec<&(f64, Payload<T>)> = cfg.sources.iter().filter_map(|s| buf.arrivals.get(s)).collect();
    if present.is_empty() {
        return Ok(None);
    }
    if present.len() < cfg.sources.len() {
        if !partial {
            return Ok(None);
        }
        if cfg.compute.needs_all_operands() {
            let missing = cfg.sources.iter().find(|s| !buf.arrivals.contains_key(*s)).expect("some missing");
            return Err(EpbError::MissingSource(missing.clone()));
        }
    }
    let payloads: Vec<&Payload<T>> = present.iter().map(|(_, p)| p).collect();
    let value = Payload::combine(cfg.compute, &payloads)?;
    let ts = present.iter().map(|(t, _)| *t).fold(f64::NEG_INFINITY, f64::max);
    Ok(Some(PacketRecord::new(
        cfg.engine.clone(),
        cfg.destination.clone(),
        &cfg.user,
        buf.epoch,
        ts,
        value,
    )))
}

/// Per-engine packet accounting. Each (packet, matching config) pair is
/// one arrival; a packet matching no config is one arrival and one
/// passthrough.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EngineCounters {
    pub arrivals: u64,
    pub rate_drops: u64,
    pub jitter_discards: u64,
    /// Arrived after the epoch was emitted or timed out.
    pub stale: u64,
    /// Second arrival from the same source in one epoch.
    pub duplicates: u64,
    /// Payload of the wrong or malformed type.
    pub type_drops: u64,
    pub buffered: u64,
    pub passthrough: u64,
    pub emitted: u64,
    pub timeouts: u64,
    pub rejected_epochs: u64,
    pub compute_errors: u64,
}

impl EngineCounters {
    pub fn balanced(&self) -> bool {
        self.arrivals
            == self.rate_drops
                + self.jitter_discards
                + self.stale
                + self.duplicates
                + self.type_drops
                + self.buffered
                + self.passthrough
    }

    pub fn merge(&mut self, o: &EngineCounters) {
        self.arrivals += o.arrivals;
        self.rate_drops += o.rate_drops;
        self.jitter_discards += o.jitter_discards;
        self.stale += o.stale;
        self.duplicates += o.duplicates;
        self.type_drops += o.type_drops;
        self.buffered += o.buffered;
        self.passthrough += o.passthrough;
        self.emitted += o.emitted;
        self.timeouts += o.timeouts;
        self.rejected_epochs += o.rejected_epochs;
        self.compute_errors += o.compute_errors;
    }
}

/// Epoch deadline to schedule on the event queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Timer {
    pub engine: NodeId,
    pub user: String,
    pub destination: NodeId,
    pub epoch: u64,
    pub deadline_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome<T> {
    pub emitted: Vec<PacketRecord<T>>,
    /// Set when no config matched; the packet leaves unmodified.
    pub passthrough: Option<PacketRecord<T>>,
    pub timers: Vec<Timer>,
}

#[derive(Debug, Clone)]
struct Slot<T> {
    cfg: EngineConfig,
    rate: RateFilter,
    open: BTreeMap<u64, EpochBuffer<T>>,
    closed: BTreeSet<u64>,
}

#[derive(Debug, Clone)]
pub struct Engine<T> {
    id: NodeId,
    slots: Vec<Slot<T>>,
    counters: EngineCounters,
}

impl<T: Scalar> Engine<T> {
    pub fn new(id: NodeId) -> Self {
        Engine {
            id,
            slots: Vec::new(),
            counters: EngineCounters::default(),
        }
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    /// Installs or replaces the config with the same (user, destination).
    /// Replacing resets that config's buffers.
    pub fn configure(&mut self, cfg: EngineConfig) -> Result<(), EpbError> {
        cfg.validate()?;
        if cfg.engine != self.id {
            return Err(EpbError::Validation(format!("config for {} given to {}", cfg.engine, self.id)));
        }
        let slot = Slot {
            cfg,
            rate: RateFilter::default(),
            open: BTreeMap::new(),
            closed: BTreeSet::new(),
        };
        match self
            .slots
            .iter_mut()
            .find(|s| s.cfg.user == slot.cfg.user && s.cfg.destination == slot.cfg.destination)
        {
            Some(existing) if existing.cfg == slot.cfg => {}
            Some(existing) => *existing = slot,
            None => self.slots.push(slot),
        }
        Ok(())
    }

    pub fn remove(&mut self, user: &str, destination: &str) -> bool {
        let before = self.slots.len();
        self.slots
            .retain(|s| !(s.cfg.user == user && s.cfg.destination.as_str() == destination));
        before != self.slots.len()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn configs(&self) -> impl Iterator<Item = &EngineConfig> {
        self.slots.iter().map(|s| &s.cfg)
    }

    pub fn counters(&self) -> &EngineCounters {
        &self.counters
    }

    /// Runs `p` through every config that takes it.
    pub fn process(&mut self, p: PacketRecord<T>, now_ms: f64) -> Outcome<T> {
        let mut out = Outcome {
            emitted: Vec::new(),
            passthrough: None,
            timers: Vec::new(),
        };
        let matching: Vec<usize> = (0..self.slots.len())
            .filter(|&i| self.slots[i].cfg.matches(&p.user, &p.source))
            .collect();
        if matching.is_empty() {
            self.counters.arrivals += 1;
            self.counters.passthrough += 1;
            out.passthrough = Some(p);
            return out;
        }
        for i in matching {
            self.counters.arrivals += 1;
            self.feed(i, &p, now_ms, &mut out);
        }
        out
    }

    fn feed(&mut self, i: usize, p: &PacketRecord<T>, now_ms: f64, out: &mut Outcome<T>) {
        let c = &mut self.counters;
        let slot = &mut self.slots[i];
        let cfg = &slot.cfg;
        if p.payload.validate().is_err() || cfg.data_type.is_some_and(|t| t != p.payload.data_type()) {
            c.type_drops += 1;
            return;
        }
        if rate_filter(&mut slot.rate, cfg, p) == RateVerdict::Drop {
            c.rate_drops += 1;
            return;
        }
        let epoch = match cfg.rate_ms {
            Some(rate) => (p.timestamp_ms / rate).floor().max(0.0) as u64,
            None => p.epoch,
        };
        if slot.closed.contains(&epoch) {
            c.stale += 1;
            return;
        }
        let buf = slot.open.entry(epoch).or_insert_with(|| {
            out.timers.push(Timer {
                engine: cfg.engine.clone(),
                user: cfg.user.clone(),
                destination: cfg.destination.clone(),
                epoch,
                deadline_ms: now_ms + cfg.rate_ms.map_or(DEFAULT_TIMEOUT_MS, |r| 2.0 * r),
            });
            EpochBuffer::new(epoch, p.timestamp_ms)
        });
        if dejitter(buf, cfg, p) == JitterVerdict::Discard {
            c.jitter_discards += 1;
            return;
        }
        if buf.arrivals.contains_key(&p.source) {
            c.duplicates += 1;
            return;
        }
        buf.arrivals.insert(p.source.clone(), (p.timestamp_ms, p.payload.clone()));
        c.buffered += 1;
        if buf.arrivals.len() == cfg.sources.len() {
            let buf = slot.open.remove(&epoch).expect("present");
            slot.closed.insert(epoch);
            match aggregate_and_compute(&buf, cfg, false) {
                Ok(Some(pkt)) => {
                    c.emitted += 1;
                    out.emitted.push(pkt);
                }
                Ok(None) => {}
                Err(_) => c.compute_errors += 1,
            }
        }
    }

    /// Closes the epoch named by `timer` if it is still open.
    pub fn fire(&mut self, timer: &Timer) -> Vec<PacketRecord<T>> {
        let Some(slot) = self
            .slots
            .iter_mut()
            .find(|s| s.cfg.user == timer.user && s.cfg.destination == timer.destination)
        else {
            return Vec::new();
        };
        let Some(buf) = slot.open.remove(&timer.epoch) else {
            return Vec::new();
        };
        slot.closed.insert(timer.epoch);
        self.counters.timeouts += 1;
        if slot.cfg.on_timeout == TimeoutPolicy::Reject {
            self.counters.rejected_epochs += 1;
            return Vec::new();
        }
        match aggregate_and_compute(&buf, &slot.cfg, true) {
            Ok(Some(pkt)) => {
                self.counters.emitted += 1;
                vec![pkt]
            }
            Ok(None) => Vec::new(),
            Err(EpbError::MissingSource(_)) => {
                self.counters.rejected_epochs += 1;
                Vec::new()
            }
            Err(_) => {
                self.counters.compute_errors += 1;
                Vec::new()
            }
        }
    }

    /// Epochs currently buffered, over all configs.
    pub fn open_epochs(&self) -> usize {
        self.slots.iter().map(|s| s.open.len()).sum()
    }
}
