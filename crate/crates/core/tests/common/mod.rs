#![allow(dead_code)]

use std::collections::BTreeSet;

use flip_core::graph::{Graph, Tree};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NESTED: &str =
    "datapath_a(max(avg(bs1:bs10),avg(bs11:bs100),max(min(bs101:bs200),min(bs201:bs300))),destination<-user)";

pub struct RandomGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, u32)>,
    pub terminals: Vec<usize>,
}

impl RandomGraph {
    pub fn graph(&self) -> Graph<u32> {
        let mut g = Graph::new(self.n);
        for &(a, b, w) in &self.edges {
            g.add_edge(a, b, w);
        }
        g
    }
}

/// Connected graph: a random spanning tree plus extra edges.
pub fn random_graph(seed: u64, max_nodes: usize, terminals: (usize, usize), max_weight: u32) -> RandomGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(terminals.1.max(4)..=max_nodes);
    let mut edges = Vec::new();
    let mut have = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        have.insert((u, v));
        edges.push((u, v, rng.random_range(1..=max_weight)));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let (a, b) = (a.min(b), a.max(b));
        if a != b && have.insert((a, b)) {
            edges.push((a, b, rng.random_range(1..=max_weight)));
        }
    }
    let k = rng.random_range(terminals.0..=terminals.1.min(n));
    let mut pool: Vec<usize> = (0..n).collect();
    let mut ts = Vec::new();
    for _ in 0..k {
        let i = rng.random_range(0..pool.len());
        ts.push(pool.swap_remove(i));
    }
    ts.sort_unstable();
    RandomGraph { n, edges, terminals: ts }
}

fn find(p: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while p[r] != r {
        r = p[r];
    }
    p[x] = r;
    r
}

/// Minimum spanning tree weight of the subgraph induced by `keep`, or
/// `None` if that subgraph is disconnected.
fn induced_mst(n: usize, edges: &[(usize, usize, u32)], keep: &BTreeSet<usize>) -> Option<u32> {
    let mut es: Vec<_> = edges.iter().filter(|(a, b, _)| keep.contains(a) && keep.contains(b)).collect();
    es.sort_by_key(|e| e.2);
    let mut p: Vec<usize> = (0..n).collect();
    let (mut w, mut joined) = (0, 0);
    for &&(a, b, c) in &es {
        let (ra, rb) = (find(&mut p, a), find(&mut p, b));
        if ra != rb {
            p[ra] = rb;
            w += c;
            joined += 1;
        }
    }
    (joined + 1 == keep.len()).then_some(w)
}

/// Optimal Steiner tree weight: the best MST over every vertex set that
/// contains the terminals.
pub fn brute_force_steiner(g: &RandomGraph) -> u32 {
    let others: Vec<usize> = (0..g.n).filter(|v| !g.terminals.contains(v)).collect();
    let mut best = u32::MAX;
    for mask in 0u32..(1 << others.len()) {
        let mut keep: BTreeSet<usize> = g.terminals.iter().copied().collect();
        keep.extend(others.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v));
        if let Some(w) = induced_mst(g.n, &g.edges, &keep) {
            best = best.min(w);
        }
    }
    best
}

/// The tree uses graph edges, is acyclic and connected, spans the
/// terminals and reports its true weight.
pub fn check_tree(g: &RandomGraph, t: &Tree<u32>) -> Result<(), String> {
    let mut sum = 0;
    for &(a, b) in &t.edges {
        let w = g
            .edges
            .iter()
            .find(|e| (e.0, e.1) == (a.min(b), a.max(b)))
            .ok_or_else(|| format!("({a},{b}) is not an edge"))?
            .2;
        sum += w;
    }
    if sum != t.weight {
        return Err(format!("weight {} but edges sum to {sum}", t.weight));
    }
    let mut verts: BTreeSet<usize> = t.edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    verts.extend(g.terminals.iter().copied());
    if t.edges.len() + 1 != verts.len() {
        return Err(format!("{} edges over {} vertices", t.edges.len(), verts.len()));
    }
    let mut p: Vec<usize> = (0..g.n).collect();
    for &(a, b) in &t.edges {
        let (ra, rb) = (find(&mut p, a), find(&mut p, b));
        if ra == rb {
            return Err("cycle".into());
        }
        p[ra] = rb;
    }
    let root = find(&mut p, g.terminals[0]);
    if verts.iter().any(|&v| find(&mut p, v) != root) {
        return Err("disconnected".into());
    }
    Ok(())
}
