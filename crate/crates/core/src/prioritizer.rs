//! Recurrent least-visited selection over a [`ClusterTree`].
//!
//! Each cycle descends from the root into the active child with the fewest
//! visits (first such child on ties), takes the leaf it reaches, and then
//! refreshes the `active` flags bottom-up. Repeats caused by a report
//! sitting in several clusters are filtered out once the tree is exhausted.

use std::collections::HashSet;

use crate::report_store::ReportId;
use crate::sequence::{PrioritizedSequence, StrategyKind};
use crate::tree::{ClusterNode, ClusterTree, TreeError};

/// Picks one report below `node`, bumping `visits` along the path and
/// deactivating the chosen leaf. Returns `None` if `node` is inactive.
pub fn select_report(node: &mut ClusterNode) -> Option<ReportId> {
    if !node.active {
        return None;
    }
    node.visits += 1;
    if let Some(id) = node.report_id {
        node.active = false;
        return Some(id);
    }
    let mut next: Option<usize> = None;
    for (i, child) in node.children.iter().enumerate() {
        let better = match next {
            None => true,
            Some(j) => node.children[j].visits > child.visits,
        };
        if child.active && better {
            next = Some(i);
        }
    }
    next.and_then(|i| select_report(&mut node.children[i]))
}

/// Post-order refresh: an internal node stays active iff some child is.
pub fn update_status(node: &mut ClusterNode) {
    if node.is_leaf() {
        return;
    }
    for child in &mut node.children {
        update_status(child);
    }
    node.active = node.children.iter().any(|c| c.active);
}

/// Stable first-occurrence filter.
pub fn deduplicate(raw: &[ReportId]) -> Vec<ReportId> {
    let mut seen = HashSet::with_capacity(raw.len());
    raw.iter().copied().filter(|id| seen.insert(*id)).collect()
}

/// Runs the selection loop until the root is exhausted and returns the raw
/// sequence, repeats included.
pub fn generate_raw(tree: &mut ClusterTree) -> Result<Vec<ReportId>, TreeError> {
    tree.ensure_fresh()?;
    // Empty categories have no selectable leaf; settle them before the first pick.
    update_status(&mut tree.root);
    let mut raw = Vec::with_capacity(tree.root.leaf_count());
    while tree.root.active {
        match select_report(&mut tree.root) {
            Some(id) => raw.push(id),
            None => break,
        }
        update_status(&mut tree.root);
    }
    Ok(raw)
}

/// Consumes a fresh tree and returns the deduplicated prioritized order.
pub fn generate_sequence(mut tree: ClusterTree) -> Result<PrioritizedSequence, TreeError> {
    let raw = generate_raw(&mut tree)?;
    Ok(PrioritizedSequence::new(deduplicate(&raw), StrategyKind::LlmPrior))
}
