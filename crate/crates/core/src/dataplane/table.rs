use std::collections::BTreeMap;

use serde::Serialize;

use crate::planner::{Action, FlowMatch, FlowRule};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowEntry {
    pub rule: FlowRule,
    pub packets: u64,
}

/// Ordered rules of one switch plus its counters. First match wins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTable {
    pub switch: NodeId,
    pub entries: Vec<FlowEntry>,
    pub lookups: u64,
    pub misses: u64,
    /// Packets received from / sent to each neighbor.
    pub rx: BTreeMap<NodeId, u64>,
    pub tx: BTreeMap<NodeId, u64>,
    /// Lookups broken down by the packet's final destination.
    pub by_destination: BTreeMap<NodeId, u64>,
}

impl FlowTable {
    pub fn new(switch: NodeId) -> Self {
        FlowTable {
            switch,
            entries: Vec::new(),
            lookups: 0,
            misses: 0,
            rx: BTreeMap::new(),
            tx: BTreeMap::new(),
            by_destination: BTreeMap::new(),
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &FlowRule> {
        self.entries.iter().map(|e| &e.rule)
    }

    pub fn contains(&self, rule: &FlowRule) -> bool {
        self.entries.iter().any(|e| e.rule == *rule)
    }

    /// Appends unless an identical rule is present. Returns whether added.
    pub fn add(&mut self, rule: FlowRule) -> bool {
        if self.contains(&rule) {
            return false;
        }
        self.entries.push(FlowEntry { rule, packets: 0 });
        true
    }

    /// Removes rules with exactly this match. Returns how many.
    pub fn remove(&mut self, m: &FlowMatch) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| e.rule.matches != *m);
        before - self.entries.len()
    }

    /// Removes rules matched by `pred`.
    pub fn remove_where(&mut self, pred: impl Fn(&FlowRule) -> bool) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| !pred(&e.rule));
        before - self.entries.len()
    }

    pub fn clear(&mut self) -> usize {
        let n = self.entries.len();
        self.entries.clear();
        n
    }

    /// Rewrites the action of rules with exactly this match.
    pub fn modify(&mut self, m: &FlowMatch, action: &Action) -> usize {
        let mut n = 0;
        for e in self.entries.iter_mut().filter(|e| e.rule.matches == *m) {
            e.rule.action = action.clone();
            n += 1;
        }
        n
    }

    /// First matching rule, updating lookup counters.
    pub fn lookup(&mut self, final_destination: &NodeId, source: &NodeId) -> Option<Action> {
        self.lookups += 1;
        *self.by_destination.entry(final_destination.clone()).or_insert(0) += 1;
        match self
            .entries
            .iter_mut()
            .find(|e| e.rule.matches.matches(final_destination, source))
        {
            Some(e) => {
                e.packets += 1;
                Some(e.rule.action.clone())
            }
            None => {
                self.misses += 1;
                None
            }
        }
    }
}
