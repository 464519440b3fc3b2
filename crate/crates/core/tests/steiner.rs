mod common;

use std::collections::BTreeSet;

use common::{brute_force_steiner, check_tree, random_graph, RandomGraph};
use flip_core::graph::Graph;
use flip_core::planner::steiner_tree;
use flip_core::topology::{id, NodeId};
use proptest::prelude::*;

fn floyd(g: &RandomGraph) -> Vec<Vec<u32>> {
    let inf = u32::MAX / 4;
    let mut d = vec![vec![inf; g.n]; g.n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b, w) in &g.edges {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..g.n {
        for i in 0..g.n {
            for j in 0..g.n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn within_two_approximation(seed in any::<u64>()) {
        let g = random_graph(seed, 8, (3, 5), 5);
        let t = g.graph().steiner_tree(&g.terminals).unwrap();
        prop_assert!(check_tree(&g, &t).is_ok(), "{:?}", check_tree(&g, &t));
        let opt = brute_force_steiner(&g);
        let k = g.terminals.len() as u32;
        prop_assert!(t.weight >= opt);
        prop_assert!(t.weight * k <= (2 * k - 2) * opt, "weight {} opt {} k {}", t.weight, opt, k);
    }

    #[test]
    fn shortest_paths_match_floyd_warshall(seed in any::<u64>()) {
        let g = random_graph(seed, 9, (2, 2), 5);
        let d = floyd(&g);
        let graph = g.graph();
        for a in 0..g.n {
            for b in 0..g.n {
                let p = graph.shortest_path(a, b).unwrap();
                prop_assert_eq!(p.weight, d[a][b]);
            }
        }
    }

    #[test]
    fn two_terminals_give_the_shortest_path(seed in any::<u64>()) {
        let g = random_graph(seed, 9, (2, 2), 5);
        let (a, b) = (g.terminals[0], g.terminals[1]);
        let t = g.graph().steiner_tree(&[a, b]).unwrap();
        prop_assert_eq!(t.weight, floyd(&g)[a][b]);
    }

    #[test]
    fn all_terminals_give_a_minimum_spanning_tree(seed in any::<u64>()) {
        let mut g = random_graph(seed, 8, (2, 2), 5);
        g.terminals = (0..g.n).collect();
        let t = g.graph().steiner_tree(&g.terminals).unwrap();
        prop_assert_eq!(t.weight, brute_force_steiner(&g));
        prop_assert_eq!(t.edges.len(), g.n - 1);
    }
}

#[test]
fn float_weights_break_ties_by_hops() {
    // 0-1-3 and 0-2-3 cost the same; 0-3 direct costs the same in one hop.
    let mut g = Graph::<f64>::new(4);
    g.add_edge(0, 1, 0.1);
    g.add_edge(1, 3, 0.2);
    g.add_edge(0, 2, 0.2);
    g.add_edge(2, 3, 0.1);
    g.add_edge(0, 3, 0.3);
    let p = g.shortest_path(0, 3).unwrap();
    assert_eq!(p.nodes, [0, 3]);
}

#[test]
fn topology_level_tree_spans_terminals() {
    let t = flip_core::harness::build_experiment_topology();
    let terms: BTreeSet<NodeId> = ["bs1", "bs35", "bs77", "user"].into_iter().map(id).collect();
    let tree = steiner_tree(&t, &terms).unwrap();
    let v = tree.vertices();
    assert!(terms.iter().all(|n| v.contains(n)));
    assert_eq!(tree.edges.len() + 1, v.len());
    assert_eq!(tree.weight_ms, tree.edges.iter().map(|l| l.delay_ms).sum::<f64>());
}
