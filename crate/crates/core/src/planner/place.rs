use std::collections::{BTreeMap, BTreeSet};

use super::{OpPlacement, PlanError};
use crate::dsl::TaskGraph;
use crate::topology::{NodeId, Topology};

/// Maps every operation to a switch.
///
/// Each leaf-only operation goes to the switch of its leftmost source.
/// Walking up from it, every ancestor not yet placed goes to a switch
/// adjacent to that same edge switch, skipping switches already handed
/// to an ancestor. The walk stops at the first ancestor placed by an
/// earlier walk.
///
/// This mirrors the heuristic literally, including two known gaps: an
/// operation ignores where its other sources live, and a grandparent is
/// placed next to the originating edge switch rather than next to its
/// child's switch.
pub fn place_operations(tg: &TaskGraph, t: &Topology) -> Result<Vec<OpPlacement>, PlanError> {
    let mut switch_of: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut visited: BTreeSet<usize> = BTreeSet::new();
    let mut taken: BTreeSet<NodeId> = BTreeSet::new();

    for node in tg.leaf_only_parents() {
        let leaf = tg.leftmost_child(node).expect("operations have children");
        let source = tg.node(leaf).source().expect("leaf-only parent");
        let edge = t.connected_switch(source.as_str())?.clone();
        switch_of.insert(node, edge.clone());

        let mut parent = tg.node(node).parent;
        while let Some(p) = parent {
            if !visited.insert(p) {
                break;
            }
            let sw = t
                .adjacent_switch(edge.as_str(), &taken)
                .map_err(|_| {
                    PlanError::Placement(format!(
                        "no free switch next to {edge} for {}",
                        tg.node(p).label
                    ))
                })?
                .clone();
            taken.insert(sw.clone());
            switch_of.insert(p, sw);
            parent = tg.node(p).parent;
        }
    }

    tg.ops()
        .map(|i| {
            let switch = switch_of
                .get(&i)
                .cloned()
                .ok_or_else(|| PlanError::Placement(format!("{} was never reached", tg.node(i).label)))?;
            let engine = t
                .engine_of(switch.as_str())
                .cloned()
                .ok_or_else(|| PlanError::Placement(format!("{switch} has no engine")))?;
            Ok(OpPlacement {
                op_node: i,
                label: tg.node(i).label.clone(),
                op: tg.node(i).op().expect("op"),
                switch,
                engine,
            })
        })
        .collect()
}
