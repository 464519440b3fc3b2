//! Operator placement against a step-by-step transcription of its pseudocode
//! that works from the raw expression and link list, not the library's task
//! graph or topology queries.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use flip_core::dsl::{expand_sources, parse_request, CoverageMap};
use flip_core::harness::small_topology;
use flip_core::planner::{place_operations, PlanError};
use flip_core::topology::{Topology, TopologyBuilder, NodeKind};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct World {
    links: Vec<(String, String, u32)>,
    /// base station -> switch
    attach: BTreeMap<String, String>,
    text: String,
}

/// Six switches with engines, random switch wiring, two to four base
/// stations per switch and a random request over them.
fn world(seed: u64, depth: u32) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links = Vec::new();
    let mut have = BTreeSet::new();
    for v in 2..=6u32 {
        let u = rng.random_range(1..v);
        have.insert((u, v));
        links.push((format!("sw{u}"), format!("sw{v}"), rng.random_range(1..=5)));
    }
    for _ in 0..rng.random_range(0..=5) {
        let (a, b) = (rng.random_range(1..=6u32), rng.random_range(1..=6u32));
        if a < b && have.insert((a, b)) {
            links.push((format!("sw{a}"), format!("sw{b}"), rng.random_range(1..=5)));
        }
    }
    let mut attach = BTreeMap::new();
    let mut n = 0;
    for s in 1..=6 {
        for _ in 0..rng.random_range(2..=4) {
            n += 1;
            attach.insert(format!("bs{n}"), format!("sw{s}"));
        }
    }
    let expr = random_expr(&mut rng, depth, n, true);
    World {
        links,
        attach,
        text: format!("datapath_a({expr},destination<-user)"),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32, stations: u32, root: bool) -> String {
    let mut free: Vec<bool> = vec![true; stations as usize + 1];
    free[0] = false;
    random_op(rng, depth, &mut free, root).expect("stations left for the root")
}

/// Each station is handed out at most once.
fn random_op(rng: &mut ChaCha8Rng, depth: u32, free: &mut [bool], root: bool) -> Option<String> {
    const OPS: [&str; 4] = ["max", "min", "avg", "sum"];
    let op = OPS[rng.random_range(0..OPS.len())];
    let arity = rng.random_range(if root { 2 } else { 1 }..=3);
    let mut args = Vec::new();
    for _ in 0..arity {
        let arg = if depth > 1 && rng.random_bool(0.6) {
            random_op(rng, depth - 1, free, false)
        } else {
            let open: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
            if open.is_empty() {
                None
            } else {
                let a = open[rng.random_range(0..open.len())];
                let mut b = a;
                let want = rng.random_range(0..=3);
                while b + 1 < free.len() && free[b + 1] && b - a < want {
                    b += 1;
                }
                free[a..=b].iter_mut().for_each(|f| *f = false);
                Some(if a == b { format!("bs{a}") } else { format!("bs{a}:bs{b}") })
            }
        };
        args.extend(arg);
    }
    (!args.is_empty()).then(|| format!("{op}({})", args.join(",")))
}

fn topology(w: &World) -> Topology {
    let mut b = TopologyBuilder::new();
    for s in 1..=6 {
        b = b.switch_with_engine(&format!("sw{s}"));
    }
    for (bs, sw) in &w.attach {
        b = b.node(bs, NodeKind::BaseStation).link(bs, sw, 1.0);
    }
    b = b.node("user", NodeKind::Destination).link("user", "sw1", 1.0);
    for (a, c, d) in &w.links {
        b = b.link(a, c, *d as f64);
    }
    b.build().unwrap()
}

// A tiny expression tree built from the request text itself.
struct Node {
    label: Option<String>,
    station: Option<String>,
    parent: Option<usize>,
    children: Vec<usize>,
}

fn parse_tree(text: &str) -> Vec<Node> {
    let body = text.strip_prefix("datapath_a(").unwrap();
    let body = &body[..body.rfind(",destination").unwrap()];
    let mut nodes: Vec<Node> = Vec::new();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut tok = String::new();
    let flush = |tok: &mut String, nodes: &mut Vec<Node>, stack: &Vec<usize>| {
        if tok.is_empty() {
            return;
        }
        let parent = *stack.last().unwrap();
        let stations: Vec<String> = match tok.split_once(':') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a[2..].parse().unwrap(), b[2..].parse().unwrap());
                (a..=b).map(|i| format!("bs{i}")).collect()
            }
            None => vec![tok.clone()],
        };
        for s in stations {
            nodes.push(Node { label: None, station: Some(s), parent: Some(parent), children: vec![] });
            let i = nodes.len() - 1;
            nodes[parent].children.push(i);
        }
        tok.clear();
    };
    for ch in body.chars() {
        match ch {
            '(' => {
                let c = counters.entry(tok.clone()).or_insert(0);
                *c += 1;
                let parent = stack.last().copied();
                nodes.push(Node { label: Some(format!("{tok}{c}")), station: None, parent, children: vec![] });
                let i = nodes.len() - 1;
                if let Some(p) = parent {
                    nodes[p].children.push(i);
                }
                stack.push(i);
                tok.clear();
            }
            ')' => {
                flush(&mut tok, &mut nodes, &stack);
                stack.pop();
            }
            ',' => flush(&mut tok, &mut nodes, &stack),
            c => tok.push(c),
        }
    }
    nodes
}

/// The pseudocode, line by line.
fn oracle(w: &World) -> Result<BTreeMap<String, String>, String> {
    let tree = parse_tree(&w.text);
    let is_leaf = |i: usize| tree[i].station.is_some();
    let edgenodes: Vec<usize> = (0..tree.len())
        .filter(|&i| !is_leaf(i) && tree[i].children.iter().all(|&c| is_leaf(c)))
        .collect();
    let adjacent = |sw: &str, taken: &BTreeSet<String>| -> Option<String> {
        w.links
            .iter()
            .filter_map(|(a, b, d)| match (a == sw, b == sw) {
                (true, _) => Some((*d, b.clone())),
                (_, true) => Some((*d, a.clone())),
                _ => None,
            })
            .filter(|(_, s)| !taken.contains(s))
            .min()
            .map(|(_, s)| s)
    };
    let mut visited = BTreeSet::new();
    let mut taken = BTreeSet::new();
    let mut out = BTreeMap::new();
    for e in edgenodes {
        let leaf = tree[e].children[0];
        let edgeswitch = w.attach[tree[leaf].station.as_ref().unwrap()].clone();
        out.insert(tree[e].label.clone().unwrap(), edgeswitch.clone());
        let mut p = tree[e].parent;
        while let Some(pn) = p {
            if !visited.insert(pn) {
                break;
            }
            let sw = adjacent(&edgeswitch, &taken).ok_or("no free adjacent switch")?;
            taken.insert(sw.clone());
            out.insert(tree[pn].label.clone().unwrap(), sw);
            p = tree[pn].parent;
        }
    }
    Ok(out)
}

fn library(w: &World) -> Result<BTreeMap<String, String>, PlanError> {
    let t = topology(w);
    let tg = expand_sources(&parse_request(&w.text)?, &t, &CoverageMap::new())?;
    Ok(place_operations(&tg, &t)?
        .into_iter()
        .map(|p| (p.label, p.switch.to_string()))
        .collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_level_requests_match_pseudocode(seed in any::<u64>()) {
        let w = world(seed, 2);
        match (oracle(&w), library(&w)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "{}", w.text),
            (Err(_), Err(PlanError::Placement(_))) => {}
            (a, b) => prop_assert!(false, "{}: oracle {:?} library {:?}", w.text, a, b),
        }
    }

    #[test]
    fn deeper_requests_match_pseudocode(seed in any::<u64>()) {
        let w = world(seed, 4);
        match (oracle(&w), library(&w)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "{}", w.text),
            (Err(_), Err(PlanError::Placement(_))) => {}
            (a, b) => prop_assert!(false, "{}: oracle {:?} library {:?}", w.text, a, b),
        }
    }
}

#[test]
fn single_op_lands_on_its_source_switch() {
    let t = TopologyBuilder::new()
        .switch_with_engine("sw1")
        .node("bs1", NodeKind::BaseStation)
        .node("user", NodeKind::Destination)
        .link("bs1", "sw1", 1.0)
        .link("user", "sw1", 1.0)
        .build()
        .unwrap();
    let tg = expand_sources(&parse_request("datapath_a(max(bs1),destination<-user)").unwrap(), &t, &CoverageMap::new()).unwrap();
    let p = place_operations(&tg, &t).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!((p[0].switch.as_str(), p[0].engine.as_str()), ("sw1", "e-sw1"));
}

#[test]
fn nested_matches_manual_decomposition() {
    let t = small_topology();
    let tg = expand_sources(&parse_request(common::NESTED).unwrap(), &t, &CoverageMap::new()).unwrap();
    let w = World {
        links: t
            .links()
            .iter()
            .filter(|l| t.kind(l.a.as_str()) == Some(NodeKind::Switch) && t.kind(l.b.as_str()) == Some(NodeKind::Switch))
            .map(|l| (l.a.to_string(), l.b.to_string(), l.delay_ms as u32))
            .collect(),
        attach: t
            .nodes_of(NodeKind::BaseStation)
            .map(|b| (b.to_string(), t.connected_switch(b.as_str()).unwrap().to_string()))
            .collect(),
        text: common::NESTED.to_owned(),
    };
    let lib: BTreeMap<String, String> = place_operations(&tg, &t)
        .unwrap()
        .into_iter()
        .map(|p| (p.label, p.switch.to_string()))
        .collect();
    assert_eq!(oracle(&w).unwrap(), lib);
}
