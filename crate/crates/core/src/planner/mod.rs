//! Maps a request onto the network: operation placement, Steiner tree,
//! delay admission, and compilation to flow rules and engine configs.

mod compile;
mod place;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::RuleSet;
pub use place::place_operations;

use crate::dsl::{self, CoverageMap, DslError, Mode, Request, Requirements, TaskGraph};
use crate::epb::{EngineConfig, EpbError};
use crate::graph::Tree;
use crate::op::OpKind;
use crate::topology::{Link, NodeId, NodeKind, Topology, TopologyError};
use compile::{Input, Stage};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("placement failed: {0}")]
    Placement(String),
    #[error("rule compilation failed: {0}")]
    Compile(String),
    #[error("rejected: worst path delay {worst_path_delay_ms} ms exceeds the {bound_ms} ms bound")]
    RejectedByDelay { worst_path_delay_ms: f64, bound_ms: f64 },
    #[error(transparent)]
    Epb(#[from] EpbError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpPlacement {
    /// Index into the task graph.
    pub op_node: usize,
    pub label: String,
    pub op: OpKind,
    pub switch: NodeId,
    pub engine: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinerTree {
    pub terminals: Vec<NodeId>,
    pub edges: Vec<Link>,
    pub weight_ms: f64,
}

impl SteinerTree {
    fn from_tree(t: &Topology, terminals: &BTreeSet<usize>, tree: &Tree<f64>) -> Self {
        SteinerTree {
            terminals: terminals.iter().map(|&i| t.id_at(i).clone()).collect(),
            edges: t.tree_links(tree),
            weight_ms: tree.weight,
        }
    }

    /// Nodes touched by the tree (or the lone terminal of an empty tree).
    pub fn vertices(&self) -> BTreeSet<NodeId> {
        let mut v: BTreeSet<NodeId> = self.edges.iter().flat_map(|l| [l.a.clone(), l.b.clone()]).collect();
        v.extend(self.terminals.iter().cloned());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "node", rename_all = "snake_case")]
pub enum Action {
    ForwardTo(NodeId),
    RedirectToEngine(NodeId),
    /// Hand the packet to its final destination, which hangs off this switch.
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowMatch {
    pub final_destination: NodeId,
    pub sources: BTreeSet<NodeId>,
}

impl FlowMatch {
    pub fn matches(&self, final_destination: &NodeId, source: &NodeId) -> bool {
        self.final_destination == *final_destination && self.sources.contains(source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowRule {
    pub switch: NodeId,
    #[serde(rename = "match")]
    pub matches: FlowMatch,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatapathPlan {
    pub mode: Mode,
    pub user: String,
    pub destination: NodeId,
    pub placements: Vec<OpPlacement>,
    /// For a manual chain, the union of the per-command trees.
    pub tree: SteinerTree,
    pub rules: Vec<FlowRule>,
    pub engine_configs: Vec<EngineConfig>,
    /// `final_destination` each source must stamp on its packets.
    pub ingress: BTreeMap<NodeId, NodeId>,
    pub admitted: bool,
    pub worst_path_delay_ms: f64,
    pub delay_bound_ms: Option<f64>,
}

impl DatapathPlan {
    /// Canonical JSON; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans serialize")
    }

    pub fn switches(&self) -> BTreeSet<NodeId> {
        self.rules.iter().map(|r| r.switch.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Time an engine spends on one computation.
    pub engine_processing_ms: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            engine_processing_ms: 0.0,
        }
    }
}

/// Approximate Steiner tree over `terminals` (at least one).
pub fn steiner_tree(t: &Topology, terminals: &BTreeSet<NodeId>) -> Result<SteinerTree, PlanError> {
    let idx = terminal_indices(t, terminals)?;
    let tree = index_tree(t, &idx)?;
    Ok(SteinerTree::from_tree(t, &idx, &tree))
}

fn terminal_indices(t: &Topology, terminals: &BTreeSet<NodeId>) -> Result<BTreeSet<usize>, PlanError> {
    terminals.iter().map(|n| Ok(t.index_of(n.as_str())?)).collect()
}

fn index_tree(t: &Topology, idx: &BTreeSet<usize>) -> Result<Tree<f64>, PlanError> {
    let list: Vec<usize> = idx.iter().copied().collect();
    t.graph()
        .steiner_tree(&list)
        .ok_or_else(|| PlanError::Compile("terminals are not connected".into()))
}

/// Worst-case delay of a plan against a requirement.
pub fn check_delay(worst_path_delay_ms: f64, req: &Requirements) -> bool {
    req.delay_ms.is_none_or(|bound| worst_path_delay_ms <= bound)
}

/// Plans `req`, failing with [`PlanError::RejectedByDelay`] when the delay
/// bound cannot be met.
pub fn plan(req: &Request, t: &Topology, cov: &CoverageMap) -> Result<DatapathPlan, PlanError> {
    plan_with(req, t, cov, &PlanOptions::default())
}

pub fn plan_with(req: &Request, t: &Topology, cov: &CoverageMap, opts: &PlanOptions) -> Result<DatapathPlan, PlanError> {
    admit(draft_plan(req, t, cov, opts)?)
}

fn admit(p: DatapathPlan) -> Result<DatapathPlan, PlanError> {
    match (p.admitted, p.delay_bound_ms) {
        (false, Some(bound_ms)) => Err(PlanError::RejectedByDelay {
            worst_path_delay_ms: p.worst_path_delay_ms,
            bound_ms,
        }),
        _ => Ok(p),
    }
}

/// Like [`plan`] but returns rejected plans with `admitted == false`.
/// Delay is checked before rule compilation, so a rejected automated plan
/// carries no rules or engine configs.
pub fn draft_plan(req: &Request, t: &Topology, cov: &CoverageMap, opts: &PlanOptions) -> Result<DatapathPlan, PlanError> {
    let tg = dsl::expand_sources(req, t, cov)?;
    match req.mode {
        Mode::Automated => automated(req, &tg, t, opts),
        Mode::Manual => manual_chain(std::slice::from_ref(req), t, cov, opts),
    }
}

fn automated(req: &Request, tg: &TaskGraph, t: &Topology, opts: &PlanOptions) -> Result<DatapathPlan, PlanError> {
    let placements = place_operations(tg, t)?;
    let mut terminals: BTreeSet<NodeId> = tg.sources().into_iter().collect();
    terminals.extend(placements.iter().map(|p| p.switch.clone()));
    terminals.insert(tg.destination.clone());
    let idx = terminal_indices(t, &terminals)?;
    let tree = index_tree(t, &idx)?;

    let engine_of: BTreeMap<usize, &OpPlacement> = placements.iter().map(|p| (p.op_node, p)).collect();
    let mut stages = Vec::new();
    for p in &placements {
        let node = tg.node(p.op_node);
        let inputs = node
            .children
            .iter()
            .map(|&c| match tg.node(c).source() {
                Some(s) => Input {
                    source: s.clone(),
                    address: tg.destination.clone(),
                    routed: true,
                },
                None => Input {
                    source: engine_of[&c].engine.clone(),
                    address: p.engine.clone(),
                    routed: false,
                },
            })
            .collect();
        let target = match node.parent {
            Some(parent) => engine_of[&parent].engine.clone(),
            None => tg.destination.clone(),
        };
        let mut st = Stage {
            compute: p.op,
            switch: p.switch.clone(),
            engine: p.engine.clone(),
            user: req.user.clone(),
            inputs,
            target,
            tree: &tree,
            rate_ms: None,
            jitter_ms: None,
            data_type: None,
        };
        st.apply_requirements(&req.requirements, t);
        stages.push(st);
    }
    let worst = compile::worst_path_delay(&stages, t, opts.engine_processing_ms)?;
    let admitted = check_delay(worst, &req.requirements);
    let mut rules = RuleSet::new();
    let engine_configs = if admitted {
        compile::compile(&stages, t, &mut rules)?
    } else {
        Vec::new()
    };
    let ingress = tg.sources().into_iter().map(|s| (s, tg.destination.clone())).collect();
    Ok(DatapathPlan {
        mode: Mode::Automated,
        user: req.user.clone(),
        destination: tg.destination.clone(),
        placements,
        tree: SteinerTree::from_tree(t, &idx, &tree),
        rules: rules.rules(),
        engine_configs,
        ingress,
        admitted,
        worst_path_delay_ms: worst,
        delay_bound_ms: req.requirements.delay_ms,
    })
}

/// Plans a sequence of manual commands as one datapath. Each command gets
/// its own tree over {sources, switch, destination}; rules are merged and
/// must not conflict. Delay is measured through the whole chain and
/// checked against the tightest bound any command states.
pub fn plan_manual_chain(reqs: &[Request], t: &Topology, cov: &CoverageMap) -> Result<DatapathPlan, PlanError> {
    admit(manual_chain(reqs, t, cov, &PlanOptions::default())?)
}

fn manual_chain(reqs: &[Request], t: &Topology, cov: &CoverageMap, opts: &PlanOptions) -> Result<DatapathPlan, PlanError> {
    let first = reqs.first().ok_or_else(|| PlanError::Compile("empty command chain".into()))?;
    let mut parts = Vec::new();
    for req in reqs {
        if req.mode != Mode::Manual {
            return Err(PlanError::Compile("chains hold datapath_m commands only".into()));
        }
        let tg = dsl::expand_sources(req, t, cov)?;
        let switch = req.switch.clone().expect("manual requests carry a switch");
        let engine = t
            .engine_of(switch.as_str())
            .cloned()
            .ok_or_else(|| PlanError::Placement(format!("{switch} has no engine")))?;
        let mut terminals: BTreeSet<NodeId> = tg.sources().into_iter().collect();
        terminals.insert(switch.clone());
        terminals.insert(tg.destination.clone());
        let idx = terminal_indices(t, &terminals)?;
        let tree = index_tree(t, &idx)?;
        parts.push((req, tg, switch, engine, idx, tree));
    }

    let mut stages = Vec::new();
    let mut placements = Vec::new();
    let mut ingress = BTreeMap::new();
    for (req, tg, switch, engine, _, tree) in &parts {
        let top = tg.top();
        let op = tg.node(top).op().expect("manual requests hold one operation");
        placements.push(OpPlacement {
            op_node: top,
            label: tg.node(top).label.clone(),
            op,
            switch: switch.clone(),
            engine: engine.clone(),
        });
        let inputs: Vec<Input> = tg
            .sources()
            .into_iter()
            .map(|s| Input {
                source: s,
                address: engine.clone(),
                routed: true,
            })
            .collect();
        for i in &inputs {
            if t.kind(i.source.as_str()) == Some(NodeKind::BaseStation) {
                ingress.insert(i.source.clone(), engine.clone());
            }
        }
        let mut st = Stage {
            compute: op,
            switch: switch.clone(),
            engine: engine.clone(),
            user: req.user.clone(),
            inputs,
            target: tg.destination.clone(),
            tree,
            rate_ms: None,
            jitter_ms: None,
            data_type: None,
        };
        st.apply_requirements(&req.requirements, t);
        stages.push(st);
    }

    let worst = compile::worst_path_delay(&stages, t, opts.engine_processing_ms)?;
    let mut rules = RuleSet::new();
    let engine_configs = compile::compile(&stages, t, &mut rules)?;

    let mut terminals = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for (_, _, _, _, idx, tree) in &parts {
        terminals.extend(idx.iter().copied());
        edges.extend(tree.edges.iter().copied());
    }
    let weight = edges
        .iter()
        .map(|&(a, b)| t.graph().weight(a, b).expect("edge"))
        .sum();
    let union = Tree { edges, weight };

    let bound = reqs
        .iter()
        .filter_map(|r| r.requirements.delay_ms)
        .min_by(f64::total_cmp);
    let destination = parts
        .iter()
        .rev()
        .map(|p| &p.1.destination)
        .find(|d| t.kind(d.as_str()).is_some_and(NodeKind::is_host))
        .unwrap_or(&parts.last().expect("nonempty").1.destination)
        .clone();
    Ok(DatapathPlan {
        mode: Mode::Manual,
        user: first.user.clone(),
        destination,
        placements,
        tree: SteinerTree::from_tree(t, &terminals, &union),
        rules: rules.rules(),
        engine_configs,
        ingress,
        admitted: bound.is_none_or(|b| worst <= b),
        worst_path_delay_ms: worst,
        delay_bound_ms: bound,
    })
}

/// Send-everything plan: every source follows its shortest path to the
/// destination and nothing is computed in the network.
pub fn plan_baseline(req: &Request, t: &Topology, cov: &CoverageMap) -> Result<DatapathPlan, PlanError> {
    let tg = dsl::expand_sources(req, t, cov)?;
    let dest = tg.destination.clone();
    let mut rules = RuleSet::new();
    let mut worst: f64 = 0.0;
    let mut edges = BTreeSet::new();
    let mut terminals = BTreeSet::new();
    terminals.insert(t.index_of(dest.as_str())?);
    for s in tg.sources() {
        terminals.insert(t.index_of(s.as_str())?);
        let (path, delay) = t.shortest_path(s.as_str(), dest.as_str())?;
        worst = worst.max(delay);
        for w in path.windows(2) {
            let (a, b) = (t.index_of(w[0].as_str())?, t.index_of(w[1].as_str())?);
            edges.insert((a.min(b), a.max(b)));
        }
        lay_shortest(&mut rules, t, &path, &dest, &s)?;
    }
    let weight = edges.iter().map(|&(a, b)| t.graph().weight(a, b).expect("edge")).sum();
    let tree = Tree { edges, weight };
    Ok(DatapathPlan {
        mode: tg.mode,
        user: req.user.clone(),
        destination: dest.clone(),
        placements: Vec::new(),
        tree: SteinerTree::from_tree(t, &terminals, &tree),
        rules: rules.rules(),
        engine_configs: Vec::new(),
        ingress: tg.sources().into_iter().map(|s| (s, dest.clone())).collect(),
        admitted: check_delay(worst, &req.requirements),
        worst_path_delay_ms: worst,
        delay_bound_ms: req.requirements.delay_ms,
    })
}

fn lay_shortest(rules: &mut RuleSet, t: &Topology, path: &[NodeId], dest: &NodeId, source: &NodeId) -> Result<(), PlanError> {
    let switches = &path[1..path.len() - 1];
    if switches.is_empty() {
        return Err(PlanError::Compile(format!("{source} is directly linked to {dest}")));
    }
    for (i, sw) in switches.iter().enumerate() {
        if t.kind(sw.as_str()) != Some(NodeKind::Switch) {
            return Err(PlanError::Compile(format!("route transits non-switch node {sw}")));
        }
        let action = match switches.get(i + 1) {
            Some(next) => Action::ForwardTo(next.clone()),
            None => Action::Deliver,
        };
        rules.insert(sw, dest, source, action)?;
    }
    Ok(())
}

/// Proactive all-pairs rules: every base station to every destination and
/// cloud host along shortest paths.
pub fn static_rules(t: &Topology) -> Result<Vec<FlowRule>, PlanError> {
    let mut rules = RuleSet::new();
    let hosts: Vec<&NodeId> = t.nodes().filter(|(_, k)| k.is_host()).map(|(n, _)| n).collect();
    for bs in t.nodes_of(NodeKind::BaseStation) {
        for &h in &hosts {
            let (path, _) = t.shortest_path(bs.as_str(), h.as_str())?;
            lay_shortest(&mut rules, t, &path, h, bs)?;
        }
    }
    Ok(rules.rules())
}
