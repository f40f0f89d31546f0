//! Hierarchical cluster tree with per-node selection bookkeeping.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report_store::ReportId;

pub const ROOT_LABEL: &str = "ROOT";
pub const UNCATEGORIZED_LABEL: &str = "Uncategorized";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree root must be a category node")]
    RootIsLeaf,
    #[error("node '{0}' carries a report id and children")]
    LeafWithChildren(String),
    #[error("tree contains no reports")]
    NoReports,
    #[error("tree has already been used for selection")]
    AlreadyUsed,
}

/// A category (internal) node or a report reference (leaf).
///
/// Child order is significant: it is the tie-break order during selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub label: String,
    pub report_id: Option<ReportId>,
    pub children: Vec<ClusterNode>,
    #[serde(default)]
    pub visits: u32,
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

impl ClusterNode {
    pub fn leaf(id: ReportId) -> Self {
        Self {
            label: String::new(),
            report_id: Some(id),
            children: Vec::new(),
            visits: 0,
            active: true,
        }
    }

    pub fn category(label: impl Into<String>, children: Vec<ClusterNode>) -> Self {
        Self {
            label: label.into(),
            report_id: None,
            children,
            visits: 0,
            active: true,
        }
    }

    /// Category whose children are all leaves, in the given order.
    pub fn cluster(label: impl Into<String>, ids: impl IntoIterator<Item = ReportId>) -> Self {
        Self::category(label, ids.into_iter().map(Self::leaf).collect())
    }

    pub fn is_leaf(&self) -> bool {
        self.report_id.is_some()
    }

    /// Report ids of leaf children directly under this node.
    pub fn direct_reports(&self) -> impl Iterator<Item = ReportId> + '_ {
        self.children.iter().filter_map(|c| c.report_id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &ClusterNode> + '_ {
        self.children.iter().filter(|c| !c.is_leaf())
    }

    /// Every leaf id in depth-first, child order (duplicates kept).
    pub fn leaf_ids(&self) -> Vec<ReportId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<ReportId>) {
        match self.report_id {
            Some(id) => out.push(id),
            None => self.children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    fn walk(&self, f: &mut impl FnMut(&ClusterNode)) {
        f(self);
        self.children.iter().for_each(|c| c.walk(f));
    }

    fn is_pristine(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |n| ok &= n.visits == 0 && n.active);
        ok
    }

    fn check(&self) -> Result<(), TreeError> {
        if self.is_leaf() && !self.children.is_empty() {
            return Err(TreeError::LeafWithChildren(self.label.clone()));
        }
        self.children.iter().try_for_each(ClusterNode::check)
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |node| n += usize::from(node.is_leaf()));
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub root: ClusterNode,
}

impl ClusterTree {
    /// Wraps top-level categories under a synthetic root.
    pub fn new(categories: Vec<ClusterNode>) -> Self {
        Self {
            root: ClusterNode::category(ROOT_LABEL, categories),
        }
    }

    /// Distinct report ids reachable from the root.
    pub fn report_ids(&self) -> BTreeSet<ReportId> {
        self.root.leaf_ids().into_iter().collect()
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        if self.root.is_leaf() {
            return Err(TreeError::RootIsLeaf);
        }
        self.root.check()?;
        if self.root.leaf_count() == 0 {
            return Err(TreeError::NoReports);
        }
        Ok(())
    }

    /// True if no selection has touched the tree yet.
    pub fn is_pristine(&self) -> bool {
        self.root.is_pristine()
    }

    pub(crate) fn ensure_fresh(&self) -> Result<(), TreeError> {
        self.validate()?;
        if !self.is_pristine() {
            return Err(TreeError::AlreadyUsed);
        }
        Ok(())
    }
}
