//! The weighted network graph every plan and simulation runs against.
//!
//! A [`Topology`] is immutable once built. Node indices follow sorted
//! [`NodeId`] order, which is what makes every graph tie-break in this crate
//! lexicographic on node names.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, Tree};

/// Default delay of a link whose `delay_ms` is omitted.
pub const DEFAULT_LINK_DELAY_MS: f64 = 1.0;
/// Default delay of the switch-to-engine hop.
pub const DEFAULT_ENGINE_DELAY_MS: f64 = 0.0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("malformed topology document: {0}")]
    Parse(String),
    #[error("invalid topology: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Node name, e.g. `bs17`, `sw3`, `e-sw3`, `user`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self, TopologyError> {
        let name = name.into();
        if is_valid_id(&name) {
            Ok(NodeId(name))
        } else {
            Err(TopologyError::Validation(format!("invalid node id {name:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Splits `bs17` into `("bs", 17)`.
    pub fn numeric_suffix(&self) -> Option<(&str, u64)> {
        split_numeric(&self.0)
    }
}

pub(crate) fn is_valid_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn split_numeric(s: &str) -> Option<(&str, u64)> {
    let digits = s.len() - s.bytes().rev().take_while(u8::is_ascii_digit).count();
    if digits == s.len() || digits == 0 {
        return None;
    }
    let (prefix, num) = s.split_at(digits);
    if num.len() > 1 && num.starts_with('0') {
        return None;
    }
    num.parse().ok().map(|n| (prefix, n))
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NodeId {
    type Err = TopologyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeId::new(s)
    }
}

impl TryFrom<String> for NodeId {
    type Error = TopologyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        NodeId::new(s)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Shorthand for building ids in code and tests. Panics on invalid names.
pub fn id(name: &str) -> NodeId {
    NodeId::new(name).unwrap_or_else(|e| panic!("{e}"))
}

/// Expands `bs1:bs10` (or `bs1:10`) into `bs1, bs2, ..., bs10`.
pub fn expand_range(from: &str, to: &str) -> Result<Vec<NodeId>, TopologyError> {
    let (prefix, lo) = split_numeric(from)
        .ok_or_else(|| TopologyError::Parse(format!("range bound {from:?} has no numeric suffix")))?;
    let hi = match split_numeric(to) {
        Some((p, n)) if p == prefix => n,
        Some(_) => {
            return Err(TopologyError::Parse(format!(
                "range {from}:{to} mixes prefixes"
            )))
        }
        None => to
            .parse()
            .map_err(|_| TopologyError::Parse(format!("bad range bound {to:?}")))?,
    };
    if lo > hi {
        return Err(TopologyError::Parse(format!("empty range {from}:{to}")));
    }
    (lo..=hi).map(|n| NodeId::new(format!("{prefix}{n}"))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    #[serde(alias = "base_station", alias = "bs")]
    BaseStation,
    Switch,
    Engine,
    Destination,
    Cloud,
}

impl NodeKind {
    pub fn is_host(self) -> bool {
        matches!(self, NodeKind::Destination | NodeKind::Cloud)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::BaseStation => "basestation",
            NodeKind::Switch => "switch",
            NodeKind::Engine => "engine",
            NodeKind::Destination => "destination",
            NodeKind::Cloud => "cloud",
        };
        f.write_str(s)
    }
}

/// Undirected link. Stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub delay_ms: f64,
}

/// On-disk shape of a topology file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub links: Vec<LinkEntry>,
}

/// A node declaration. Either `id` or `range` must be set; `switch` adds an
/// implicit link to that switch (used for base stations and engines).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_ms: Option<f64>,
}

#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<(String, NodeKind)>,
    links: Vec<(String, String, f64)>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, id: &str, kind: NodeKind) -> Self {
        self.nodes.push((id.to_owned(), kind));
        self
    }

    pub fn link(mut self, a: &str, b: &str, delay_ms: f64) -> Self {
        self.links.push((a.to_owned(), b.to_owned(), delay_ms));
        self
    }

    /// Switch plus its engine `e-<switch>` on a zero-delay link.
    pub fn switch_with_engine(self, sw: &str) -> Self {
        let engine = format!("e-{sw}");
        self.node(sw, NodeKind::Switch)
            .node(&engine, NodeKind::Engine)
            .link(sw, &engine, DEFAULT_ENGINE_DELAY_MS)
    }

    pub fn build(self) -> Result<Topology, TopologyError> {
        Topology::assemble(self.nodes, self.links)
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    ids: Vec<NodeId>,
    kinds: Vec<NodeKind>,
    index: BTreeMap<NodeId, usize>,
    links: Vec<Link>,
    graph: Graph<f64>,
}

impl Topology {
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let doc: TopologyDocument =
            serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &TopologyDocument) -> Result<Self, TopologyError> {
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for entry in &doc.nodes {
            let names: Vec<String> = match (&entry.id, &entry.range) {
                (Some(id), None) => vec![id.clone()],
                (None, Some(range)) => {
                    let (from, to) = range.split_once(':').ok_or_else(|| {
                        TopologyError::Parse(format!("range {range:?} must look like bs1:bs10"))
                    })?;
                    expand_range(from, to)?.into_iter().map(String::from).collect()
                }
                _ => {
                    return Err(TopologyError::Parse(
                        "each node entry needs exactly one of `id` or `range`".into(),
                    ))
                }
            };
            let default_delay = match entry.kind {
                NodeKind::Engine => DEFAULT_ENGINE_DELAY_MS,
                _ => DEFAULT_LINK_DELAY_MS,
            };
            for name in names {
                if let Some(sw) = &entry.switch {
                    links.push((name.clone(), sw.clone(), entry.delay_ms.unwrap_or(default_delay)));
                } else if entry.delay_ms.is_some() {
                    return Err(TopologyError::Parse(format!(
                        "node {name} sets delay_ms without a switch"
                    )));
                }
                nodes.push((name, entry.kind));
            }
        }
        for link in &doc.links {
            links.push((
                link.a.clone(),
                link.b.clone(),
                link.delay_ms.unwrap_or(DEFAULT_LINK_DELAY_MS),
            ));
        }
        Self::assemble(nodes, links)
    }

    fn assemble(
        nodes: Vec<(String, NodeKind)>,
        raw_links: Vec<(String, String, f64)>,
    ) -> Result<Self, TopologyError> {
        let mut declared: BTreeMap<NodeId, NodeKind> = BTreeMap::new();
        for (name, kind) in nodes {
            let id = NodeId::new(name)?;
            if declared.insert(id.clone(), kind).is_some() {
                return Err(TopologyError::Validation(format!("duplicate node id {id}")));
            }
        }
        if declared.is_empty() {
            return Err(TopologyError::Validation("topology has no nodes".into()));
        }
        let ids: Vec<NodeId> = declared.keys().cloned().collect();
        let kinds: Vec<NodeKind> = declared.values().copied().collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();

        let mut graph = Graph::new(ids.len());
        let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut links = Vec::with_capacity(raw_links.len());
        for (a, b, delay) in raw_links {
            let lookup = |name: &str| {
                index.get(name).copied().ok_or_else(|| {
                    TopologyError::Validation(format!("link references undeclared node {name}"))
                })
            };
            let (ia, ib) = (lookup(&a)?, lookup(&b)?);
            if ia == ib {
                return Err(TopologyError::Validation(format!("self loop on {a}")));
            }
            if !(delay.is_finite() && delay >= 0.0) {
                return Err(TopologyError::Validation(format!(
                    "link {a}-{b} has invalid delay {delay}"
                )));
            }
            let key = (ia.min(ib), ia.max(ib));
            if !seen.insert(key) {
                return Err(TopologyError::Validation(format!("duplicate link {a}-{b}")));
            }
            graph.add_edge(ia, ib, delay);
            links.push(Link {
                a: ids[key.0].clone(),
                b: ids[key.1].clone(),
                delay_ms: delay,
            });
        }
        links.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));

        let topo = Topology {
            ids,
            kinds,
            index,
            links,
            graph,
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let mut engines_per_switch: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, kind) in self.kinds.iter().enumerate() {
            if !matches!(kind, NodeKind::BaseStation | NodeKind::Engine) {
                continue;
            }
            let neighbors = self.graph.neighbors(i);
            let switches: Vec<usize> = neighbors
                .iter()
                .map(|&(n, _)| n)
                .filter(|&n| self.kinds[n] == NodeKind::Switch)
                .collect();
            if neighbors.len() != 1 || switches.len() != 1 {
                return Err(TopologyError::Validation(format!(
                    "{kind} {} must link to exactly one switch and nothing else",
                    self.ids[i]
                )));
            }
            if *kind == NodeKind::Engine {
                let count = engines_per_switch.entry(switches[0]).or_default();
                *count += 1;
                if *count > 1 {
                    return Err(TopologyError::Validation(format!(
                        "switch {} has more than one engine",
                        self.ids[switches[0]]
                    )));
                }
            }
        }
        if !self.graph.is_connected() {
            return Err(TopologyError::Validation("graph is disconnected".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// All nodes in sorted id order.
    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, NodeKind)> + '_ {
        self.ids.iter().zip(self.kinds.iter().copied())
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &NodeId> + '_ {
        self.nodes().filter(move |&(_, k)| k == kind).map(|(id, _)| id)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, n: &str) -> bool {
        self.index.contains_key(n)
    }

    pub fn kind(&self, n: &str) -> Option<NodeKind> {
        self.index.get(n).map(|&i| self.kinds[i])
    }

    pub fn index_of(&self, n: &str) -> Result<usize, TopologyError> {
        self.index
            .get(n)
            .copied()
            .ok_or_else(|| TopologyError::NotFound(format!("node {n}")))
    }

    pub fn id_at(&self, i: usize) -> &NodeId {
        &self.ids[i]
    }

    /// Resolves a name to the stored id.
    pub fn node(&self, n: &str) -> Result<&NodeId, TopologyError> {
        self.index_of(n).map(|i| &self.ids[i])
    }

    pub fn graph(&self) -> &Graph<f64> {
        &self.graph
    }

    pub fn delay(&self, a: &str, b: &str) -> Option<f64> {
        let (ia, ib) = (self.index.get(a)?, self.index.get(b)?);
        self.graph.weight(*ia, *ib)
    }

    /// Neighbors of `n` with link delays, in id order.
    pub fn neighbors(&self, n: &str) -> Result<Vec<(&NodeId, f64)>, TopologyError> {
        let i = self.index_of(n)?;
        Ok(self
            .graph
            .neighbors(i)
            .iter()
            .map(|&(j, w)| (&self.ids[j], w))
            .collect())
    }

    /// The switch a non-switch node hangs off.
    pub fn connected_switch(&self, n: &str) -> Result<&NodeId, TopologyError> {
        let i = self.index_of(n)?;
        if self.kinds[i] == NodeKind::Switch {
            return Err(TopologyError::NotFound(format!("connected switch of {n}: node is a switch")));
        }
        self.graph
            .neighbors(i)
            .iter()
            .find(|&&(j, _)| self.kinds[j] == NodeKind::Switch)
            .map(|&(j, _)| &self.ids[j])
            .ok_or_else(|| TopologyError::NotFound(format!("switch adjacent to {n}")))
    }

    /// The engine attached to switch `sw`, if any.
    pub fn engine_of(&self, sw: &str) -> Option<&NodeId> {
        let i = *self.index.get(sw)?;
        if self.kinds[i] != NodeKind::Switch {
            return None;
        }
        self.graph
            .neighbors(i)
            .iter()
            .find(|&&(j, _)| self.kinds[j] == NodeKind::Engine)
            .map(|&(j, _)| &self.ids[j])
    }

    /// Switch adjacent to `sw` that is not in `visited`: smallest link delay
    /// first, then smallest id.
    pub fn adjacent_switch(
        &self,
        sw: &str,
        visited: &BTreeSet<NodeId>,
    ) -> Result<&NodeId, TopologyError> {
        let i = self.index_of(sw)?;
        if self.kinds[i] != NodeKind::Switch {
            return Err(TopologyError::NotFound(format!("{sw} is not a switch")));
        }
        let mut best: Option<(f64, usize)> = None;
        // neighbors are index-ordered, so the first minimum wins ties
        for &(j, w) in self.graph.neighbors(i) {
            if self.kinds[j] != NodeKind::Switch || visited.contains(&self.ids[j]) {
                continue;
            }
            if best.is_none_or(|(bw, _)| w < bw) {
                best = Some((w, j));
            }
        }
        best.map(|(_, j)| &self.ids[j])
            .ok_or_else(|| TopologyError::NotFound(format!("unvisited switch adjacent to {sw}")))
    }

    /// Minimum-delay path; ties go to fewer hops, then the lexicographically
    /// smallest node sequence.
    pub fn shortest_path(&self, a: &str, b: &str) -> Result<(Vec<NodeId>, f64), TopologyError> {
        let (ia, ib) = (self.index_of(a)?, self.index_of(b)?);
        let path = self
            .graph
            .shortest_path(ia, ib)
            .ok_or_else(|| TopologyError::NotFound(format!("path {a} -> {b}")))?;
        Ok((self.names(&path.nodes), path.weight))
    }

    pub fn names(&self, indices: &[usize]) -> Vec<NodeId> {
        indices.iter().map(|&i| self.ids[i].clone()).collect()
    }

    pub(crate) fn tree_links(&self, tree: &Tree<f64>) -> Vec<Link> {
        tree.edges
            .iter()
            .map(|&(a, b)| Link {
                a: self.ids[a].clone(),
                b: self.ids[b].clone(),
                delay_ms: self.graph.weight(a, b).expect("tree edge exists"),
            })
            .collect()
    }

    /// Rebuilds the document form (explicit links only).
    pub fn to_document(&self) -> TopologyDocument {
        TopologyDocument {
            nodes: self
                .nodes()
                .map(|(id, kind)| NodeEntry {
                    id: Some(id.to_string()),
                    range: None,
                    kind,
                    switch: None,
                    delay_ms: None,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkEntry {
                    a: l.a.to_string(),
                    b: l.b.to_string(),
                    delay_ms: Some(l.delay_ms),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Topology {
        TopologyBuilder::new()
            .switch_with_engine("sw1")
            .node("bs1", NodeKind::BaseStation)
            .node("user", NodeKind::Destination)
            .link("bs1", "sw1", 1.0)
            .link("sw1", "user", 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn node_id_rules() {
        assert!(NodeId::new("e-sw3").is_ok());
        assert!(NodeId::new("bs_1").is_ok());
        assert!(NodeId::new("").is_err());
        assert!(NodeId::new("3bs").is_err());
        assert!(NodeId::new("bs 1").is_err());
    }

    #[test]
    fn ranges_expand_inclusively() {
        let r = expand_range("bs7", "bs7").unwrap();
        assert_eq!(r, vec![id("bs7")]);
        assert_eq!(expand_range("bs201", "300").unwrap().len(), 100);
        assert!(expand_range("bs5", "bs4").is_err());
        assert!(expand_range("bs1", "sw4").is_err());
    }

    #[test]
    fn minimal_topology_is_valid() {
        let t = minimal();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.connected_switch("bs1").unwrap().as_str(), "sw1");
        assert_eq!(t.connected_switch("e-sw1").unwrap().as_str(), "sw1");
        assert_eq!(t.engine_of("sw1").unwrap().as_str(), "e-sw1");
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let doc = r#"{"nodes":[{"id":"sw1","kind":"switch"}],"links":[{"a":"sw1","b":"sw9"}]}"#;
        assert!(matches!(
            Topology::from_json(doc),
            Err(TopologyError::Validation(_))
        ));
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(
            Topology::from_json("{\"nodes\": 3}"),
            Err(TopologyError::Parse(_))
        ));
    }

    #[test]
    fn duplicates_and_disconnection_are_rejected() {
        let dup = TopologyBuilder::new()
            .node("sw1", NodeKind::Switch)
            .node("sw1", NodeKind::Switch)
            .build();
        assert!(matches!(dup, Err(TopologyError::Validation(_))));
        let split = TopologyBuilder::new()
            .node("sw1", NodeKind::Switch)
            .node("sw2", NodeKind::Switch)
            .build();
        assert!(matches!(split, Err(TopologyError::Validation(_))));
        let dup_link = TopologyBuilder::new()
            .node("sw1", NodeKind::Switch)
            .node("sw2", NodeKind::Switch)
            .link("sw1", "sw2", 1.0)
            .link("sw2", "sw1", 2.0)
            .build();
        assert!(matches!(dup_link, Err(TopologyError::Validation(_))));
    }

    #[test]
    fn base_station_needs_single_switch() {
        let t = TopologyBuilder::new()
            .node("sw1", NodeKind::Switch)
            .node("sw2", NodeKind::Switch)
            .node("bs1", NodeKind::BaseStation)
            .link("bs1", "sw1", 1.0)
            .link("bs1", "sw2", 1.0)
            .build();
        assert!(matches!(t, Err(TopologyError::Validation(_))));
    }

    #[test]
    fn adjacent_switch_on_star_is_not_found() {
        let t = minimal();
        assert!(matches!(
            t.adjacent_switch("sw1", &BTreeSet::new()),
            Err(TopologyError::NotFound(_))
        ));
    }

    #[test]
    fn adjacent_switch_tie_breaks() {
        let t = TopologyBuilder::new()
            .node("sw1", NodeKind::Switch)
            .node("sw2", NodeKind::Switch)
            .node("sw3", NodeKind::Switch)
            .node("sw4", NodeKind::Switch)
            .link("sw1", "sw2", 2.0)
            .link("sw1", "sw4", 1.0)
            .link("sw1", "sw3", 1.0)
            .build()
            .unwrap();
        let none = BTreeSet::new();
        assert_eq!(t.adjacent_switch("sw1", &none).unwrap().as_str(), "sw3");
        let v = BTreeSet::from([id("sw3")]);
        assert_eq!(t.adjacent_switch("sw1", &v).unwrap().as_str(), "sw4");
        let all = BTreeSet::from([id("sw2"), id("sw3"), id("sw4")]);
        assert!(t.adjacent_switch("sw1", &all).is_err());
    }

    #[test]
    fn document_ranges_and_implicit_links() {
        let doc = r#"{
            "nodes": [
                {"id": "sw1", "kind": "switch"},
                {"id": "e-sw1", "kind": "engine", "switch": "sw1"},
                {"range": "bs1:bs5", "kind": "basestation", "switch": "sw1"},
                {"id": "user", "kind": "destination", "switch": "sw1", "delay_ms": 2}
            ]
        }"#;
        let t = Topology::from_json(doc).unwrap();
        assert_eq!(t.count(NodeKind::BaseStation), 5);
        assert_eq!(t.delay("sw1", "e-sw1"), Some(0.0));
        assert_eq!(t.delay("bs3", "sw1"), Some(1.0));
        assert_eq!(t.delay("user", "sw1"), Some(2.0));
    }

    #[test]
    fn shortest_path_line() {
        let t = minimal();
        let (p, d) = t.shortest_path("bs1", "user").unwrap();
        assert_eq!(p, vec![id("bs1"), id("sw1"), id("user")]);
        assert_eq!(d, 2.0);
        let (p, d) = t.shortest_path("sw1", "sw1").unwrap();
        assert_eq!((p, d), (vec![id("sw1")], 0.0));
    }
}
