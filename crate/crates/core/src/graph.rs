//! Index-based undirected weighted graphs and the path/tree algorithms the
//! planner needs: single-source shortest paths, minimum spanning trees and the
//! metric-closure Steiner tree approximation.
//!
//! Nodes are dense `usize` indices. Every tie is broken by index order, so a
//! caller that numbers nodes in sorted-name order gets name-lexicographic
//! tie-breaking for free.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use crate::scalar::Weight;

#[derive(Debug, Clone)]
pub struct Graph<W> {
    adj: Vec<Vec<(usize, W)>>,
}

/// Distance label produced by [`Graph::distances_to`]: total weight, then
/// number of hops as the secondary key.
pub type Label<W> = Option<(W, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Path<W> {
    pub nodes: Vec<usize>,
    pub weight: W,
}

/// An undirected tree given by its edge set (each edge stored as `(lo, hi)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<W> {
    pub edges: BTreeSet<(usize, usize)>,
    pub weight: W,
}

impl<W: Weight> Graph<W> {
    pub fn new(node_count: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); node_count],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds an undirected edge, replacing the weight of an existing one.
    pub fn add_edge(&mut self, a: usize, b: usize, w: W) {
        assert!(a != b, "self loops are not allowed");
        for (u, v) in [(a, b), (b, a)] {
            let list = &mut self.adj[u];
            match list.binary_search_by_key(&v, |&(n, _)| n) {
                Ok(pos) => list[pos].1 = w,
                Err(pos) => list.insert(pos, (v, w)),
            }
        }
    }

    /// Neighbors of `u` in ascending index order.
    pub fn neighbors(&self, u: usize) -> &[(usize, W)] {
        &self.adj[u]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<W> {
        let list = &self.adj[a];
        list.binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|pos| list[pos].1)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.adj.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.adj.len()
    }

    /// Dijkstra from `target`, keyed on `(weight, hops)`. Because the graph is
    /// undirected the labels are also distances *to* `target`.
    pub fn distances_to(&self, target: usize) -> Vec<Label<W>> {
        let mut dist: Vec<Label<W>> = vec![None; self.adj.len()];
        let mut done = vec![false; self.adj.len()];
        let mut heap = BinaryHeap::new();
        dist[target] = Some((W::zero(), 0));
        heap.push(HeapEntry {
            weight: W::zero(),
            hops: 0,
            node: target,
        });
        while let Some(HeapEntry { node: u, .. }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            let (du, hu) = dist[u].expect("popped nodes are labelled");
            for &(v, w) in &self.adj[u] {
                if done[v] {
                    continue;
                }
                let candidate = (du + w, hu + 1);
                if better(candidate, dist[v]) {
                    dist[v] = Some(candidate);
                    heap.push(HeapEntry {
                        weight: candidate.0,
                        hops: candidate.1,
                        node: v,
                    });
                }
            }
        }
        dist
    }

    /// Walks from `from` to the root of `dist` (as computed by
    /// [`Graph::distances_to`]), choosing at every step the smallest-index
    /// neighbor that stays on a minimum `(weight, hops)` path. The result is the
    /// lexicographically smallest such path.
    pub fn walk(&self, from: usize, dist: &[Label<W>]) -> Option<Path<W>> {
        let (total, _) = dist[from]?;
        let mut nodes = vec![from];
        let mut u = from;
        loop {
            let (du, hu) = dist[u]?;
            if hu == 0 {
                break;
            }
            let next = self.adj[u].iter().find_map(|&(v, w)| match dist[v] {
                Some((dv, hv)) if hv + 1 == hu && (dv + w).approx_eq(du) => Some(v),
                _ => None,
            })?;
            nodes.push(next);
            u = next;
        }
        Some(Path {
            nodes,
            weight: total,
        })
    }

    /// Minimum-weight path; ties go to fewer hops, then to the
    /// lexicographically smallest index sequence.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Path<W>> {
        let dist = self.distances_to(b);
        self.walk(a, &dist)
    }

    /// Metric-closure Steiner tree approximation (Kou, Markowsky and Berman):
    /// MST of the terminal distance graph, expanded into shortest paths, then
    /// re-spanned and pruned of non-terminal leaves. The weight is within
    /// `2 - 2/|terminals|` of optimal.
    ///
    /// Returns `None` when the terminals are not mutually reachable.
    pub fn steiner_tree(&self, terminals: &[usize]) -> Option<Tree<W>> {
        let terminals: Vec<usize> = terminals
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if terminals.len() <= 1 {
            return Some(Tree {
                edges: BTreeSet::new(),
                weight: W::zero(),
            });
        }

        let tables: Vec<Vec<Label<W>>> = terminals.iter().map(|&t| self.distances_to(t)).collect();
        let k = terminals.len();
        let mut closure = Vec::with_capacity(k * (k - 1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                let (w, _) = tables[j][terminals[i]]?;
                closure.push((i, j, w));
            }
        }
        let closure_mst = minimum_spanning_tree(k, &closure);

        let mut expanded: BTreeMap<(usize, usize), W> = BTreeMap::new();
        for (i, j, _) in closure_mst {
            let path = self.walk(terminals[i], &tables[j])?;
            for pair in path.nodes.windows(2) {
                let (a, b) = ordered(pair[0], pair[1]);
                let w = self.weight(a, b).expect("path edges exist");
                expanded.insert((a, b), w);
            }
        }

        let mut local: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in expanded.keys() {
            let next = local.len();
            local.entry(a).or_insert(next);
            let next = local.len();
            local.entry(b).or_insert(next);
        }
        let global: Vec<usize> = {
            let mut g = vec![0; local.len()];
            for (&node, &idx) in &local {
                g[idx] = node;
            }
            g
        };
        let sub_edges: Vec<(usize, usize, W)> = expanded
            .iter()
            .map(|(&(a, b), &w)| (local[&a], local[&b], w))
            .collect();
        let spanning = minimum_spanning_tree(global.len(), &sub_edges);

        let mut edges: BTreeSet<(usize, usize)> = spanning
            .into_iter()
            .map(|(a, b, _)| ordered(global[a], global[b]))
            .collect();
        prune_leaves(&mut edges, &terminals);

        let weight = edges.iter().fold(W::zero(), |acc, &(a, b)| {
            acc + self.weight(a, b).expect("tree edges exist")
        });
        Some(Tree { edges, weight })
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn better<W: Weight>(candidate: (W, usize), current: Label<W>) -> bool {
    match current {
        None => true,
        Some((w, h)) => {
            candidate.0.definitely_lt(w) || (candidate.0.approx_eq(w) && candidate.1 < h)
        }
    }
}

struct HeapEntry<W> {
    weight: W,
    hops: usize,
    node: usize,
}

impl<W: Weight> PartialEq for HeapEntry<W> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<W: Weight> Eq for HeapEntry<W> {}

impl<W: Weight> PartialOrd for HeapEntry<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<W: Weight> Ord for HeapEntry<W> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .weight
            .partial_cmp(&self.weight)
            .unwrap_or(Ordering::Equal)
            .then(other.hops.cmp(&self.hops))
            .then(other.node.cmp(&self.node))
    }
}

/// Kruskal over an explicit edge list on nodes `0..n`. Ties are broken by
/// `(a, b)` so the result is deterministic. Returns a spanning forest when the
/// input is disconnected.
pub fn minimum_spanning_tree<W: Weight>(n: usize, edges: &[(usize, usize, W)]) -> Vec<(usize, usize, W)> {
    let mut sorted: Vec<(usize, usize, W)> = edges
        .iter()
        .map(|&(a, b, w)| {
            let (a, b) = ordered(a, b);
            (a, b, w)
        })
        .collect();
    sorted.sort_by(|x, y| {
        x.2.partial_cmp(&y.2)
            .unwrap_or(Ordering::Equal)
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });
    let mut sets = DisjointSets::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (a, b, w) in sorted {
        if sets.union(a, b) {
            out.push((a, b, w));
        }
    }
    out
}

/// Repeatedly strips degree-one vertices that are not terminals.
fn prune_leaves(edges: &mut BTreeSet<(usize, usize)>, terminals: &[usize]) {
    let keep: BTreeSet<usize> = terminals.iter().copied().collect();
    loop {
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in edges.iter() {
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
        }
        let doomed: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| {
                (degree[&a] == 1 && !keep.contains(&a)) || (degree[&b] == 1 && !keep.contains(&b))
            })
            .collect();
        if doomed.is_empty() {
            return;
        }
        for e in doomed {
            edges.remove(&e);
        }
    }
}

/// The unique path between `a` and `b` inside a tree edge set.
pub fn tree_path(edges: &BTreeSet<(usize, usize)>, a: usize, b: usize) -> Option<Vec<usize>> {
    if a == b {
        return Some(vec![a]);
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(x, y) in edges {
        adj.entry(x).or_default().push(y);
        adj.entry(y).or_default().push(x);
    }
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([a]);
    parent.insert(a, a);
    while let Some(u) = queue.pop_front() {
        if u == b {
            break;
        }
        for &v in adj.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(v) {
                e.insert(u);
                queue.push_back(v);
            }
        }
    }
    if !parent.contains_key(&b) {
        return None;
    }
    let mut path = vec![b];
    let mut u = b;
    while u != a {
        u = parent[&u];
        path.push(u);
    }
    path.reverse();
    Some(path)
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Graph<u32> {
        let mut g = Graph::new(3);
        g.add_edge(0, 1, 1);
        g.add_edge(1, 2, 2);
        g
    }

    #[test]
    fn identity_path() {
        let p = line().shortest_path(1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.weight, 0);
    }

    #[test]
    fn forced_path() {
        let p = line().shortest_path(0, 2).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.weight, 3);
    }

    #[test]
    fn ties_prefer_fewer_hops_then_smaller_indices() {
        // 0-1-3 and 0-2-3 both weigh 2, 0-3 directly weighs 2 as well.
        let mut g = Graph::new(4);
        g.add_edge(0, 1, 1);
        g.add_edge(1, 3, 1);
        g.add_edge(0, 2, 1);
        g.add_edge(2, 3, 1);
        assert_eq!(g.shortest_path(0, 3).unwrap().nodes, vec![0, 1, 3]);
        g.add_edge(0, 3, 2);
        assert_eq!(g.shortest_path(0, 3).unwrap().nodes, vec![0, 3]);
    }

    #[test]
    fn zero_weight_edges_do_not_loop() {
        let mut g = Graph::new(3);
        g.add_edge(0, 1, 0.0);
        g.add_edge(1, 2, 0.0);
        let p = g.shortest_path(0, 2).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
    }

    #[test]
    fn disconnected_has_no_path() {
        let mut g: Graph<u32> = Graph::new(3);
        g.add_edge(0, 1, 1);
        assert!(g.shortest_path(0, 2).is_none());
        assert!(!g.is_connected());
        assert!(g.steiner_tree(&[0, 2]).is_none());
    }

    #[test]
    fn two_terminal_steiner_is_shortest_path() {
        let g = line();
        let t = g.steiner_tree(&[0, 2]).unwrap();
        assert_eq!(t.weight, 3);
        assert_eq!(t.edges, BTreeSet::from([(0, 1), (1, 2)]));
    }

    #[test]
    fn star_center_is_recovered() {
        // Terminals 1,2,3 around hub 0; the direct ring edges are heavier.
        let mut g = Graph::new(4);
        for leaf in 1..4 {
            g.add_edge(0, leaf, 1u32);
        }
        g.add_edge(1, 2, 3);
        g.add_edge(2, 3, 3);
        let t = g.steiner_tree(&[1, 2, 3]).unwrap();
        assert_eq!(t.weight, 3);
        assert_eq!(t.edges.len(), 3);
    }

    #[test]
    fn kruskal_spans() {
        let edges = [(0, 1, 4u32), (1, 2, 1), (0, 2, 2), (2, 3, 7)];
        let mst = minimum_spanning_tree(4, &edges);
        assert_eq!(mst.len(), 3);
        assert_eq!(mst.iter().map(|e| e.2).sum::<u32>(), 10);
    }

    #[test]
    fn tree_path_follows_edges() {
        let edges = BTreeSet::from([(0, 1), (1, 2), (1, 3)]);
        assert_eq!(tree_path(&edges, 0, 3).unwrap(), vec![0, 1, 3]);
        assert_eq!(tree_path(&edges, 2, 2).unwrap(), vec![2]);
        assert!(tree_path(&edges, 0, 9).is_none());
    }
}
