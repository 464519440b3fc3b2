//! Turns placed operations into forwarding rules, engine configs and a
//! worst-case delay figure.

use std::collections::{BTreeMap, BTreeSet};

use super::{Action, FlowMatch, FlowRule, PlanError};
use crate::dsl::{DataType, Requirements};
use crate::epb::EngineConfig;
use crate::graph::{tree_path, Tree};
use crate::op::OpKind;
use crate::topology::{NodeId, NodeKind, Topology};

/// One operand of a stage.
#[derive(Debug, Clone)]
pub(crate) struct Input {
    pub source: NodeId,
    /// `final_destination` the source stamps on its packets.
    pub address: NodeId,
    /// False when another stage of the same plan produces this operand;
    /// that stage's output leg carries it.
    pub routed: bool,
}

/// One engine computation and the legs that feed and drain it.
#[derive(Debug, Clone)]
pub(crate) struct Stage<'t> {
    pub compute: OpKind,
    pub switch: NodeId,
    pub engine: NodeId,
    pub user: String,
    pub inputs: Vec<Input>,
    /// Next engine, or the destination host.
    pub target: NodeId,
    pub tree: &'t Tree<f64>,
    pub rate_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub data_type: Option<DataType>,
}

impl Stage<'_> {
    pub fn apply_requirements(&mut self, req: &Requirements, t: &Topology) {
        self.data_type = req.data_type;
        let takes_base_stations = self
            .inputs
            .iter()
            .any(|i| t.kind(i.source.as_str()) == Some(NodeKind::BaseStation));
        if takes_base_stations {
            self.rate_ms = req.rate_ms;
            self.jitter_ms = req.jitter_ms;
        }
    }

    pub fn config(&self) -> EngineConfig {
        EngineConfig {
            rate_ms: self.rate_ms,
            jitter_ms: self.jitter_ms,
            data_type: self.data_type,
            ..EngineConfig::new(
                self.engine.clone(),
                &self.user,
                self.compute,
                self.inputs.iter().map(|i| i.source.clone()).collect(),
                self.target.clone(),
            )
        }
    }
}

/// Node path between two nodes of a tree.
pub(crate) fn route(t: &Topology, tree: &Tree<f64>, from: &str, to: &str) -> Result<Vec<NodeId>, PlanError> {
    let (a, b) = (t.index_of(from)?, t.index_of(to)?);
    tree_path(&tree.edges, a, b)
        .map(|p| t.names(&p))
        .ok_or_else(|| PlanError::Compile(format!("no tree path {from} -> {to}")))
}

fn path_delay(t: &Topology, path: &[NodeId]) -> f64 {
    path.windows(2)
        .map(|w| t.delay(w[0].as_str(), w[1].as_str()).expect("tree edges are links"))
        .sum()
}

/// Rules keyed by (switch, final destination, source). A key may map to
/// one action only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleSet {
    map: BTreeMap<(NodeId, NodeId, NodeId), Action>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, switch: &NodeId, dest: &NodeId, source: &NodeId, action: Action) -> Result<(), PlanError> {
        let key = (switch.clone(), dest.clone(), source.clone());
        match self.map.get(&key) {
            Some(existing) if *existing != action => Err(PlanError::Compile(format!(
                "conflicting actions on {switch} for {source} -> {dest}: {existing:?} vs {action:?}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.map.insert(key, action);
                Ok(())
            }
        }
    }

    pub fn extend(&mut self, rules: &[FlowRule]) -> Result<(), PlanError> {
        for r in rules {
            for s in &r.matches.sources {
                self.insert(&r.switch, &r.matches.final_destination, s, r.action.clone())?;
            }
        }
        Ok(())
    }

    pub fn from_rules(rules: &[FlowRule]) -> Result<Self, PlanError> {
        let mut set = Self::new();
        set.extend(rules)?;
        Ok(set)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Groups sources sharing (switch, destination, action), sorted.
    pub fn rules(&self) -> Vec<FlowRule> {
        let mut grouped: BTreeMap<(&NodeId, &NodeId, &Action), BTreeSet<NodeId>> = BTreeMap::new();
        for ((sw, dest, src), action) in &self.map {
            grouped.entry((sw, dest, action)).or_default().insert(src.clone());
        }
        grouped
            .into_iter()
            .map(|((sw, dest, action), sources)| FlowRule {
                switch: sw.clone(),
                matches: FlowMatch {
                    final_destination: dest.clone(),
                    sources,
                },
                action: action.clone(),
            })
            .collect()
    }

    /// Rule in force for a packet at `switch`, if any.
    pub fn lookup(&self, switch: &NodeId, dest: &NodeId, source: &NodeId) -> Option<&Action> {
        self.map.get(&(switch.clone(), dest.clone(), source.clone()))
    }
}

fn require_switches(t: &Topology, path: &[NodeId]) -> Result<(), PlanError> {
    match path.iter().find(|n| t.kind(n.as_str()) != Some(NodeKind::Switch)) {
        Some(n) => Err(PlanError::Compile(format!("route transits non-switch node {n}"))),
        None => Ok(()),
    }
}

/// Rules for a packet travelling `switches` (all switches) and handed to
/// `last` at the end.
fn lay(rules: &mut RuleSet, switches: &[NodeId], dest: &NodeId, source: &NodeId, last: Action) -> Result<(), PlanError> {
    for (i, sw) in switches.iter().enumerate() {
        let action = match switches.get(i + 1) {
            Some(next) => Action::ForwardTo(next.clone()),
            None => last.clone(),
        };
        rules.insert(sw, dest, source, action)?;
    }
    Ok(())
}

/// Forwarding and redirect rules plus one engine config per stage.
pub(crate) fn compile(stages: &[Stage], t: &Topology, rules: &mut RuleSet) -> Result<Vec<EngineConfig>, PlanError> {
    let mut configs: Vec<EngineConfig> = Vec::new();
    for st in stages {
        for input in st.inputs.iter().filter(|i| i.routed) {
            let path = route(t, st.tree, input.source.as_str(), st.switch.as_str())?;
            let switches = &path[1..];
            require_switches(t, switches)?;
            lay(rules, switches, &input.address, &input.source, Action::RedirectToEngine(st.engine.clone()))?;
        }
        match t.kind(st.target.as_str()) {
            Some(NodeKind::Engine) => {
                let target_switch = t.connected_switch(st.target.as_str())?.clone();
                let path = route(t, st.tree, st.switch.as_str(), target_switch.as_str())?;
                require_switches(t, &path)?;
                lay(rules, &path, &st.target, &st.engine, Action::RedirectToEngine(st.target.clone()))?;
            }
            Some(_) => {
                let path = route(t, st.tree, st.switch.as_str(), st.target.as_str())?;
                let switches = &path[..path.len() - 1];
                if switches.is_empty() {
                    return Err(PlanError::Compile(format!("{} is not behind a switch", st.target)));
                }
                require_switches(t, switches)?;
                lay(rules, switches, &st.target, &st.engine, Action::Deliver)?;
            }
            None => return Err(PlanError::Compile(format!("unknown target {}", st.target))),
        }
        let cfg = st.config();
        cfg.validate()
            .map_err(|e| PlanError::Compile(format!("engine config on {}: {e}", st.engine)))?;
        if configs.iter().any(|c| c.key() == cfg.key()) {
            return Err(PlanError::Compile(format!(
                "two operations on {} both feed {} for user {}",
                cfg.engine, cfg.destination, cfg.user
            )));
        }
        configs.push(cfg);
    }
    Ok(configs)
}

/// Largest source-to-destination delay along the data route: tree links,
/// plus the switch-engine link twice and `processing_ms` at every engine.
pub(crate) fn worst_path_delay(stages: &[Stage], t: &Topology, processing_ms: f64) -> Result<f64, PlanError> {
    let mut out_delay = Vec::with_capacity(stages.len());
    for st in stages {
        let engine_hop = t.delay(st.switch.as_str(), st.engine.as_str()).unwrap_or(0.0);
        let leg = match t.kind(st.target.as_str()) {
            Some(NodeKind::Engine) => {
                let ts = t.connected_switch(st.target.as_str())?;
                route(t, st.tree, st.switch.as_str(), ts.as_str())?
            }
            _ => route(t, st.tree, st.switch.as_str(), st.target.as_str())?,
        };
        out_delay.push(2.0 * engine_hop + processing_ms + path_delay(t, &leg));
    }
    let next = |i: usize| {
        stages.iter().enumerate().position(|(j, s)| {
            j != i && s.engine == stages[i].target && s.inputs.iter().any(|inp| inp.source == stages[i].engine)
        })
    };
    let mut worst: f64 = 0.0;
    for (i, st) in stages.iter().enumerate() {
        let mut downstream = 0.0;
        let (mut cur, mut hops) = (Some(i), 0);
        while let Some(c) = cur {
            if hops > stages.len() {
                return Err(PlanError::Compile("stage chain loops".into()));
            }
            downstream += out_delay[c];
            cur = next(c);
            hops += 1;
        }
        for input in st.inputs.iter().filter(|i| i.routed) {
            let path = route(t, st.tree, input.source.as_str(), st.switch.as_str())?;
            worst = worst.max(path_delay(t, &path) + downstream);
        }
    }
    Ok(worst)
}
