use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::queue::EventQueue;
use super::table::FlowTable;
use super::{DataplaneError, PacketRecord};
use crate::epb::{Engine, EngineConfig, EngineCounters, Timer};
use crate::planner::{Action, FlowMatch, FlowRule};
use crate::scalar::Scalar;
use crate::topology::{NodeId, NodeKind, Topology};

enum Event<T> {
    AtSwitch { switch: NodeId, from: NodeId, packet: PacketRecord<T> },
    AtEngine { engine: NodeId, packet: PacketRecord<T> },
    AtHost { host: NodeId, packet: PacketRecord<T> },
    Timeout(Timer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    TableMiss,
    /// Action points at a node that cannot take the packet.
    Misroute,
    HopLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PacketCounters {
    pub injected: u64,
    /// Produced by engines.
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Consumed by an engine (buffered, filtered or discarded).
    pub absorbed: u64,
    pub in_flight: u64,
}

impl PacketCounters {
    pub fn conserved(&self) -> bool {
        self.injected + self.emitted == self.delivered + self.dropped + self.absorbed + self.in_flight
    }
}

/// A packet that reached its final destination host.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delivery<T> {
    pub time_ms: f64,
    pub host: NodeId,
    pub packet: PacketRecord<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub time_ms: f64,
    pub event: &'static str,
    pub node: NodeId,
    pub packet: Option<u64>,
    pub source: Option<NodeId>,
    pub final_destination: Option<NodeId>,
    pub hop_count: Option<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchStats {
    /// Datapath id used in CSV export.
    pub dpid: u64,
    /// Lookups, restricted to the filter destination when one is set.
    pub packets: u64,
    pub misses: u64,
    pub rx: BTreeMap<NodeId, u64>,
    pub tx: BTreeMap<NodeId, u64>,
    pub rules: Vec<(FlowRule, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub filter: Option<NodeId>,
    pub switches: BTreeMap<NodeId, SwitchStats>,
    /// Sum of `packets` over switches.
    pub total_hops: u64,
    pub packets: PacketCounters,
    pub drops: BTreeMap<DropCause, u64>,
    pub engines: BTreeMap<NodeId, EngineCounters>,
}

impl StatsReport {
    /// `switch,id,count` rows, one per switch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("switch,id,count\n");
        for (sw, s) in &self.switches {
            out.push_str(&format!("{sw},{},{}\n", s.dpid, s.packets));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Comparable snapshot of installed state (rules, engine configs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FabricState {
    pub rules: BTreeMap<NodeId, Vec<FlowRule>>,
    pub engine_configs: BTreeMap<NodeId, Vec<EngineConfig>>,
}

/// Discrete-event simulation of switches, links and engines.
pub struct Fabric<T> {
    topo: Arc<Topology>,
    tables: BTreeMap<NodeId, FlowTable>,
    engines: BTreeMap<NodeId, Engine<T>>,
    dpids: BTreeMap<NodeId, u64>,
    queue: EventQueue<Event<T>>,
    now_ms: f64,
    next_packet: u64,
    counters: PacketCounters,
    drops: BTreeMap<DropCause, u64>,
    deliveries: Vec<Delivery<T>>,
    trace: Option<Vec<TraceEntry>>,
}

fn dpids(topo: &Topology) -> BTreeMap<NodeId, u64> {
    let switches: Vec<&NodeId> = topo.nodes_of(NodeKind::Switch).collect();
    let suffixes: Vec<Option<u64>> = switches.iter().map(|s| s.numeric_suffix().map(|(_, n)| n)).collect();
    let mut unique: Vec<u64> = suffixes.iter().flatten().copied().collect();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() == switches.len() {
        switches.into_iter().cloned().zip(suffixes.into_iter().flatten()).collect()
    } else {
        switches.into_iter().cloned().zip(1..).collect()
    }
}

impl<T: Scalar> Fabric<T> {
    pub fn new(topo: Arc<Topology>) -> Self {
        let tables = topo
            .nodes_of(NodeKind::Switch)
            .map(|s| (s.clone(), FlowTable::new(s.clone())))
            .collect();
        let engines = topo
            .nodes_of(NodeKind::Engine)
            .map(|e| (e.clone(), Engine::new(e.clone())))
            .collect();
        Fabric {
            dpids: dpids(&topo),
            topo,
            tables,
            engines,
            queue: EventQueue::new(),
            now_ms: 0.0,
            next_packet: 1,
            counters: PacketCounters::default(),
            drops: BTreeMap::new(),
            deliveries: Vec::new(),
            trace: None,
        }
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn now_ms(&self) -> f64 {
        self.now_ms
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// One JSON object per line.
    pub fn export_trace(&self, mut w: impl Write) -> std::io::Result<()> {
        for e in self.trace() {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn table(&self, switch: &str) -> Result<&FlowTable, DataplaneError> {
        self.tables
            .get(switch)
            .ok_or_else(|| DataplaneError::UnknownSwitch(switch.to_owned()))
    }

    pub fn tables(&self) -> impl Iterator<Item = &FlowTable> {
        self.tables.values()
    }

    pub fn dpid(&self, switch: &str) -> Option<u64> {
        self.dpids.get(switch).copied()
    }

    pub fn switch_by_dpid(&self, dpid: u64) -> Option<&NodeId> {
        self.dpids.iter().find(|(_, &d)| d == dpid).map(|(s, _)| s)
    }

    fn check_rule(&self, r: &FlowRule) -> Result<(), DataplaneError> {
        if !self.tables.contains_key(&r.switch) {
            return Err(DataplaneError::UnknownSwitch(r.switch.to_string()));
        }
        let bad = |m: String| Err(DataplaneError::InvalidRule(m));
        match &r.action {
            Action::ForwardTo(n) if self.topo.delay(r.switch.as_str(), n.as_str()).is_none() => {
                bad(format!("{n} is not adjacent to {}", r.switch))
            }
            Action::RedirectToEngine(e) if self.topo.engine_of(r.switch.as_str()) != Some(e) => {
                bad(format!("{e} is not the engine of {}", r.switch))
            }
            _ if r.matches.sources.is_empty() => bad("rule matches no sources".into()),
            _ => Ok(()),
        }
    }

    /// Validates every rule, then appends those not already present.
    /// Returns how many were added.
    pub fn install_rules(&mut self, rules: &[FlowRule]) -> Result<usize, DataplaneError> {
        for r in rules {
            self.check_rule(r)?;
        }
        let mut added = 0;
        for r in rules {
            if self.tables.get_mut(&r.switch).expect("checked").add(r.clone()) {
                added += 1;
            }
        }
        Ok(added)
    }

    pub fn remove_rules(&mut self, switch: &str, m: &FlowMatch) -> Result<usize, DataplaneError> {
        self.tables
            .get_mut(switch)
            .map(|t| t.remove(m))
            .ok_or_else(|| DataplaneError::UnknownSwitch(switch.to_owned()))
    }

    /// Removes every installed rule identical to one of `rules`.
    pub fn uninstall_rules(&mut self, rules: &[FlowRule]) -> usize {
        rules
            .iter()
            .filter_map(|r| self.tables.get_mut(&r.switch).map(|t| t.remove_where(|x| x == r)))
            .sum()
    }

    pub fn clear_rules(&mut self, switch: &str) -> Result<usize, DataplaneError> {
        self.tables
            .get_mut(switch)
            .map(FlowTable::clear)
            .ok_or_else(|| DataplaneError::UnknownSwitch(switch.to_owned()))
    }

    pub fn modify_rules(&mut self, switch: &str, m: &FlowMatch, action: &Action) -> Result<usize, DataplaneError> {
        let probe = FlowRule {
            switch: NodeId::new(switch).map_err(|_| DataplaneError::UnknownSwitch(switch.to_owned()))?,
            matches: m.clone(),
            action: action.clone(),
        };
        self.check_rule(&probe)?;
        Ok(self.tables.get_mut(switch).expect("checked").modify(m, action))
    }

    pub fn engine(&self, id: &str) -> Option<&Engine<T>> {
        self.engines.get(id)
    }

    pub fn engines(&self) -> impl Iterator<Item = &Engine<T>> {
        self.engines.values()
    }

    pub fn configure_engine(&mut self, cfg: EngineConfig) -> Result<(), DataplaneError> {
        self.engines
            .get_mut(&cfg.engine)
            .ok_or_else(|| DataplaneError::UnknownNode(cfg.engine.to_string()))?
            .configure(cfg)
            .map_err(DataplaneError::Engine)
    }

    pub fn remove_engine_config(&mut self, engine: &str, user: &str, destination: &str) -> bool {
        self.engines
            .get_mut(engine)
            .is_some_and(|e| e.remove(user, destination))
    }

    pub fn clear_engine_configs(&mut self) {
        for e in self.engines.values_mut() {
            e.clear();
        }
    }

    pub fn state(&self) -> FabricState {
        FabricState {
            rules: self
                .tables
                .iter()
                .map(|(s, t)| (s.clone(), t.rules().cloned().collect()))
                .collect(),
            engine_configs: self
                .engines
                .iter()
                .map(|(e, eng)| (e.clone(), eng.configs().cloned().collect()))
                .collect(),
        }
    }

    fn record(&mut self, event: &'static str, node: &NodeId, p: Option<&PacketRecord<T>>, detail: String) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry {
                time_ms: self.now_ms,
                event,
                node: node.clone(),
                packet: p.map(|p| p.id),
                source: p.map(|p| p.source.clone()),
                final_destination: p.map(|p| p.final_destination.clone()),
                hop_count: p.map(|p| p.hop_count),
                detail,
            });
        }
    }

    fn send(&mut self, from: &NodeId, to: &NodeId, packet: PacketRecord<T>) {
        let delay = self.topo.delay(from.as_str(), to.as_str()).expect("adjacent");
        let at = self.now_ms + delay;
        let event = match self.topo.kind(to.as_str()).expect("known node") {
            NodeKind::Switch => Event::AtSwitch {
                switch: to.clone(),
                from: from.clone(),
                packet,
            },
            NodeKind::Engine => Event::AtEngine {
                engine: to.clone(),
                packet,
            },
            _ => Event::AtHost {
                host: to.clone(),
                packet,
            },
        };
        self.counters.in_flight += 1;
        self.queue.push(at, event);
    }

    fn drop_packet(&mut self, cause: DropCause, at: &NodeId, p: &PacketRecord<T>) {
        self.counters.dropped += 1;
        *self.drops.entry(cause).or_insert(0) += 1;
        self.record("drop", at, Some(p), format!("{cause:?}"));
    }

    /// Enqueues `p` at the switch behind `at` (a base station or engine),
    /// arriving `p.timestamp_ms` plus the link delay. Returns the packet id.
    pub fn inject(&mut self, mut p: PacketRecord<T>, at: &str) -> Result<u64, DataplaneError> {
        match self.topo.kind(at) {
            Some(NodeKind::BaseStation | NodeKind::Engine) => {}
            _ => return Err(DataplaneError::UnknownNode(at.to_owned())),
        }
        let from = self.topo.node(at).expect("known").clone();
        let switch = self.topo.connected_switch(at).expect("validated topology").clone();
        let delay = self.topo.delay(at, switch.as_str()).expect("adjacent");
        p.id = self.next_packet;
        self.next_packet += 1;
        self.counters.injected += 1;
        self.counters.in_flight += 1;
        let id = p.id;
        let time = (p.timestamp_ms + delay).max(self.now_ms);
        self.queue.push(time, Event::AtSwitch { switch, from, packet: p });
        Ok(id)
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Processes the earliest event. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        let Some((time, _, event)) = self.queue.pop() else {
            return false;
        };
        self.now_ms = time;
        match event {
            Event::AtSwitch { switch, from, packet } => {
                self.counters.in_flight -= 1;
                self.at_switch(switch, from, packet)
            }
            Event::AtEngine { engine, packet } => {
                self.counters.in_flight -= 1;
                self.at_engine(engine, packet)
            }
            Event::AtHost { host, packet } => {
                self.counters.in_flight -= 1;
                if host == packet.final_destination {
                    self.counters.delivered += 1;
                    self.record("deliver", &host, Some(&packet), String::new());
                    self.deliveries.push(Delivery {
                        time_ms: time,
                        host,
                        packet,
                    });
                } else {
                    self.drop_packet(DropCause::Misroute, &host, &packet);
                }
            }
            Event::Timeout(timer) => {
                let engine = timer.engine.clone();
                let out = self.engines.get_mut(&engine).map(|e| e.fire(&timer)).unwrap_or_default();
                self.record("timeout", &engine, None, format!("epoch {}", timer.epoch));
                self.emit(&engine, out);
            }
        }
        true
    }

    fn at_switch(&mut self, switch: NodeId, from: NodeId, mut p: PacketRecord<T>) {
        p.hop_count += 1;
        let table = self.tables.get_mut(&switch).expect("switch events target switches");
        *table.rx.entry(from).or_insert(0) += 1;
        let action = table.lookup(&p.final_destination, &p.source);
        if p.hop_count as usize > self.topo.node_count() {
            self.drop_packet(DropCause::HopLimit, &switch, &p);
            return;
        }
        let Some(action) = action else {
            self.drop_packet(DropCause::TableMiss, &switch, &p);
            return;
        };
        let next = match &action {
            Action::ForwardTo(n) | Action::RedirectToEngine(n) => n.clone(),
            Action::Deliver => p.final_destination.clone(),
        };
        let reachable = self.topo.delay(switch.as_str(), next.as_str()).is_some()
            && self.topo.kind(next.as_str()) != Some(NodeKind::BaseStation);
        if !reachable {
            self.drop_packet(DropCause::Misroute, &switch, &p);
            return;
        }
        *self.tables.get_mut(&switch).expect("present").tx.entry(next.clone()).or_insert(0) += 1;
        self.record("switch", &switch, Some(&p), format!("{action:?}"));
        self.send(&switch, &next, p);
    }

    fn at_engine(&mut self, engine: NodeId, p: PacketRecord<T>) {
        let now = self.now_ms;
        self.record("engine", &engine, Some(&p), String::new());
        let out = self.engines.get_mut(&engine).expect("engine events target engines").process(p, now);
        for t in out.timers {
            self.queue.push(t.deadline_ms, Event::Timeout(t));
        }
        match out.passthrough {
            Some(p) => {
                let sw = self.topo.connected_switch(engine.as_str()).expect("engine switch").clone();
                self.send(&engine, &sw, p);
            }
            None => self.counters.absorbed += 1,
        }
        self.emit(&engine, out.emitted);
    }

    fn emit(&mut self, engine: &NodeId, packets: Vec<PacketRecord<T>>) {
        if packets.is_empty() {
            return;
        }
        let sw = self.topo.connected_switch(engine.as_str()).expect("engine switch").clone();
        for mut p in packets {
            p.id = self.next_packet;
            self.next_packet += 1;
            self.counters.emitted += 1;
            self.record("emit", engine, Some(&p), String::new());
            self.send(engine, &sw, p);
        }
    }

    /// Steps until the queue drains. Returns the number of events handled.
    pub fn run(&mut self) -> usize {
        let mut n = 0;
        while self.step() {
            n += 1;
        }
        n
    }

    /// Steps through every event due at or before `until_ms`.
    pub fn run_until(&mut self, until_ms: f64) -> usize {
        let mut n = 0;
        while self.queue.peek_time().is_some_and(|t| t <= until_ms) {
            self.step();
            n += 1;
        }
        n
    }

    pub fn counters(&self) -> PacketCounters {
        self.counters
    }

    pub fn deliveries(&self) -> &[Delivery<T>] {
        &self.deliveries
    }

    pub fn take_deliveries(&mut self) -> Vec<Delivery<T>> {
        std::mem::take(&mut self.deliveries)
    }

    /// Per-switch counts, restricted to packets addressed to `filter` when
    /// given.
    pub fn stats(&self, filter: Option<&NodeId>) -> StatsReport {
        let switches: BTreeMap<NodeId, SwitchStats> = self
            .tables
            .iter()
            .map(|(sw, t)| {
                let packets = match filter {
                    Some(d) => t.by_destination.get(d).copied().unwrap_or(0),
                    None => t.lookups,
                };
                let stats = SwitchStats {
                    dpid: self.dpids[sw],
                    packets,
                    misses: t.misses,
                    rx: t.rx.clone(),
                    tx: t.tx.clone(),
                    rules: t.entries.iter().map(|e| (e.rule.clone(), e.packets)).collect(),
                };
                (sw.clone(), stats)
            })
            .collect();
        StatsReport {
            filter: filter.cloned(),
            total_hops: switches.values().map(|s| s.packets).sum(),
            switches,
            packets: self.counters,
            drops: self.drops.clone(),
            engines: self.engines.iter().map(|(id, e)| (id.clone(), *e.counters())).collect(),
        }
    }

    /// Zeroes counters and forgets deliveries and queued events, keeping
    /// installed rules and engine configs.
    pub fn reset_counters(&mut self) {
        for t in self.tables.values_mut() {
            let mut fresh = FlowTable::new(t.switch.clone());
            for e in &t.entries {
                fresh.add(e.rule.clone());
            }
            *t = fresh;
        }
        let configs = self.state().engine_configs;
        for (id, cfgs) in configs {
            let mut e = Engine::new(id.clone());
            for c in cfgs {
                e.configure(c).expect("valid when installed");
            }
            self.engines.insert(id, e);
        }
        self.queue = EventQueue::new();
        self.now_ms = 0.0;
        self.counters = PacketCounters::default();
        self.drops.clear();
        self.deliveries.clear();
        if let Some(t) = &mut self.trace {
            t.clear();
        }
    }
}
