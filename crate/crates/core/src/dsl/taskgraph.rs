use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::{Endpoint, Expr, Mode, Request, SourceRef};
use super::coverage::CoverageMap;
use super::DslError;
use crate::op::OpKind;
use crate::topology::{NodeId, NodeKind, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Op(OpKind),
    Source(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskNode {
    /// `max1`, `avg2`, ... for operations (numbered in preorder per kind);
    /// the node id for sources.
    pub label: String,
    pub kind: TaskKind,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

impl TaskNode {
    pub fn op(&self) -> Option<OpKind> {
        match self.kind {
            TaskKind::Op(k) => Some(k),
            TaskKind::Source(_) => None,
        }
    }

    pub fn source(&self) -> Option<&NodeId> {
        match &self.kind {
            TaskKind::Source(n) => Some(n),
            TaskKind::Op(_) => None,
        }
    }
}

/// Rooted operation tree with concrete source leaves. Nodes are stored in
/// preorder, so index order is left-to-right order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskGraph {
    pub mode: Mode,
    pub nodes: Vec<TaskNode>,
    pub destination: NodeId,
}

impl TaskGraph {
    /// The topmost operation (child of the destination).
    pub fn top(&self) -> usize {
        0
    }

    pub fn node(&self, i: usize) -> &TaskNode {
        &self.nodes[i]
    }

    pub fn ops(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].op().is_some())
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].op().is_none())
    }

    pub fn op_count(&self) -> usize {
        self.ops().count()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Source node ids, left to right.
    pub fn sources(&self) -> Vec<NodeId> {
        self.leaves()
            .filter_map(|i| self.nodes[i].source().cloned())
            .collect()
    }

    /// Operations whose children are all sources, left to right.
    pub fn leaf_only_parents(&self) -> Vec<usize> {
        self.ops()
            .filter(|&i| {
                self.nodes[i]
                    .children
                    .iter()
                    .all(|&c| self.nodes[c].op().is_none())
            })
            .collect()
    }

    pub fn leftmost_child(&self, i: usize) -> Option<usize> {
        self.nodes[i].children.first().copied()
    }

    /// Direct source children of an operation, in argument order.
    pub fn source_children(&self, i: usize) -> Vec<NodeId> {
        self.nodes[i]
            .children
            .iter()
            .filter_map(|&c| self.nodes[c].source().cloned())
            .collect()
    }
}

/// Resolves ranges, regions and engine references against `topo` and
/// builds the task graph.
pub fn expand_sources(req: &Request, topo: &Topology, cov: &CoverageMap) -> Result<TaskGraph, DslError> {
    let destination = resolve_endpoint(&req.destination, topo)?;
    let dkind = topo.kind(destination.as_str()).expect("resolved");
    let dest_ok = match req.mode {
        Mode::Automated => dkind.is_host(),
        Mode::Manual => dkind.is_host() || dkind == NodeKind::Engine,
    };
    if !dest_ok {
        return Err(DslError::WrongKind {
            node: destination.to_string(),
            kind: dkind,
            role: "a destination",
        });
    }
    if let Some(sw) = &req.switch {
        match topo.kind(sw.as_str()) {
            Some(NodeKind::Switch) => {}
            Some(kind) => {
                return Err(DslError::WrongKind {
                    node: sw.to_string(),
                    kind,
                    role: "the computing switch",
                })
            }
            None => return Err(DslError::UnknownNode(sw.to_string())),
        }
    }
    let mut b = Builder {
        req,
        topo,
        cov,
        nodes: Vec::new(),
        counters: BTreeMap::new(),
        seen: BTreeSet::new(),
    };
    b.add(&req.expr, None)?;
    Ok(TaskGraph {
        mode: req.mode,
        nodes: b.nodes,
        destination,
    })
}

fn resolve_endpoint(e: &Endpoint, topo: &Topology) -> Result<NodeId, DslError> {
    match e {
        Endpoint::Node(n) => topo
            .node(n.as_str())
            .cloned()
            .map_err(|_| DslError::UnknownNode(n.to_string())),
        Endpoint::EngineOf(sw) => engine_of(sw, topo),
    }
}

fn engine_of(sw: &NodeId, topo: &Topology) -> Result<NodeId, DslError> {
    match topo.kind(sw.as_str()) {
        None => Err(DslError::UnknownNode(sw.to_string())),
        Some(NodeKind::Switch) => topo
            .engine_of(sw.as_str())
            .cloned()
            .ok_or_else(|| DslError::UnknownNode(format!("{sw}[engine]"))),
        Some(kind) => Err(DslError::WrongKind {
            node: sw.to_string(),
            kind,
            role: "an engine host",
        }),
    }
}

struct Builder<'a> {
    req: &'a Request,
    topo: &'a Topology,
    cov: &'a CoverageMap,
    nodes: Vec<TaskNode>,
    counters: BTreeMap<OpKind, usize>,
    seen: BTreeSet<NodeId>,
}

impl Builder<'_> {
    fn add(&mut self, e: &Expr, parent: Option<usize>) -> Result<(), DslError> {
        match e {
            Expr::Op { kind, args } => {
                let n = self.counters.entry(*kind).or_insert(0);
                *n += 1;
                let me = self.nodes.len();
                self.nodes.push(TaskNode {
                    label: format!("{kind}{n}"),
                    kind: TaskKind::Op(*kind),
                    children: Vec::new(),
                    parent,
                });
                if let Some(p) = parent {
                    self.nodes[p].children.push(me);
                }
                for a in args {
                    self.add(a, Some(me))?;
                }
                if self.nodes[me].children.is_empty() {
                    return Err(DslError::EmptyRange(e.to_string()));
                }
                if *kind == OpKind::Sub && self.nodes[me].children.len() < 2 {
                    return Err(DslError::Arity { op: *kind, at: None });
                }
                Ok(())
            }
            Expr::Source(s) => {
                let parent = parent.expect("sources sit under an operation");
                for id in self.resolve(s)? {
                    self.leaf(id, parent)?;
                }
                Ok(())
            }
        }
    }

    fn resolve(&self, s: &SourceRef) -> Result<Vec<NodeId>, DslError> {
        match s {
            SourceRef::Node(n) => Ok(vec![n.clone()]),
            SourceRef::Range { prefix, from, to } => {
                if from > to {
                    return Err(DslError::EmptyRange(s.to_string()));
                }
                (*from..=*to)
                    .map(|i| NodeId::new(format!("{prefix}{i}")).map_err(|_| DslError::UnknownNode(format!("{prefix}{i}"))))
                    .collect()
            }
            SourceRef::EngineOf(sw) => Ok(vec![engine_of(sw, self.topo)?]),
            SourceRef::Region(r) => {
                let members = self.cov.members(r)?;
                if members.is_empty() {
                    return Err(DslError::EmptyRegion(r.clone()));
                }
                Ok(members.to_vec())
            }
        }
    }

    fn leaf(&mut self, id: NodeId, parent: usize) -> Result<(), DslError> {
        let kind = self
            .topo
            .kind(id.as_str())
            .ok_or_else(|| DslError::UnknownNode(id.to_string()))?;
        let allowed = match self.req.mode {
            Mode::Automated => kind == NodeKind::BaseStation,
            Mode::Manual => matches!(kind, NodeKind::BaseStation | NodeKind::Engine),
        };
        if !allowed {
            return Err(DslError::WrongKind {
                node: id.to_string(),
                kind,
                role: "a source",
            });
        }
        if !self.seen.insert(id.clone()) {
            return Err(DslError::DuplicateSource(id.to_string()));
        }
        let me = self.nodes.len();
        self.nodes.push(TaskNode {
            label: id.to_string(),
            kind: TaskKind::Source(id),
            children: Vec::new(),
            parent: Some(parent),
        });
        self.nodes[parent].children.push(me);
        Ok(())
    }
}
