//! Search-tree events and the state tracker rebuilt from them.
//!
//! [`TreeState`] is driven purely by [`TreeEvent`]s, so replaying a stored
//! event log reproduces every quantity exactly as the live solver saw it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ord::Key;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proof {
    OptimalityProved,
    NodeLimit,
    TimeLimit,
}

impl Proof {
    pub fn as_str(self) -> &'static str {
        match self {
            Proof::OptimalityProved => "optimal",
            Proof::NodeLimit => "node_limit",
            Proof::TimeLimit => "time_limit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(Proof::OptimalityProved),
            "node_limit" => Some(Proof::NodeLimit),
            "time_limit" => Some(Proof::TimeLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PruneReason {
    PrunedByBound,
    Infeasible,
    IntegerFeasible,
}

impl PruneReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PruneReason::PrunedByBound => "bound",
            PruneReason::Infeasible => "infeasible",
            PruneReason::IntegerFeasible => "integer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bound" => Some(PruneReason::PrunedByBound),
            "infeasible" => Some(PruneReason::Infeasible),
            "integer" => Some(PruneReason::IntegerFeasible),
            _ => None,
        }
    }
}

/// A freshly created open node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildInfo {
    pub id: usize,
    pub depth: usize,
    /// LP bound inherited from the parent.
    pub bound: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A processed node was split on `var`; it becomes an inner node.
    Branched { node: usize, var: usize, down: ChildInfo, up: ChildInfo },
    /// A node was closed and becomes a leaf. `processed` is false when an
    /// open node is discarded without solving its LP after the incumbent
    /// improved.
    Pruned { node: usize, reason: PruneReason, processed: bool },
    NewIncumbent { node: usize, z: f64 },
    /// Emitted last for every processed node. `z_lp` is `+∞` when the
    /// node LP was infeasible.
    NodeProcessed { node: usize, depth: usize, z_lp: f64, open_count: usize },
    Finished { proof: Proof, z_star: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEvent {
    /// Number of processed nodes when the event was emitted.
    pub t: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeError {
    UnknownNode { t: usize, node: usize },
    DuplicateNode { t: usize, node: usize },
    TimeOutOfOrder { t: usize, expected: usize },
    OpenCountMismatch { t: usize, logged: usize, tracked: usize },
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::UnknownNode { t, node } => write!(f, "event at t={t} names unknown open node {node}"),
            TreeError::DuplicateNode { t, node } => write!(f, "event at t={t} recreates node {node}"),
            TreeError::TimeOutOfOrder { t, expected } => write!(f, "event time {t}, expected {expected}"),
            TreeError::OpenCountMismatch { t, logged, tracked } => {
                write!(f, "open count at t={t}: log says {logged}, replay has {tracked}")
            }
        }
    }
}

impl core::error::Error for TreeError {}

#[derive(Debug, Clone, Copy)]
struct OpenNode {
    depth: usize,
    bound: f64,
    estimate: f64,
}

/// Live view of the search tree.
#[derive(Debug, Clone)]
pub struct TreeState {
    t: usize,
    open: BTreeMap<usize, OpenNode>,
    by_bound: BTreeSet<(Key, usize)>,
    by_estimate: BTreeSet<(Key, usize)>,
    /// Open estimates grouped by depth.
    depth_open: Vec<BTreeSet<(Key, usize)>>,
    /// Smallest estimate among processed nodes at each depth.
    depth_processed_min: Vec<f64>,
    rank1: usize,
    inner: usize,
    leaves: usize,
    created: usize,
    omega: f64,
    open_history: Vec<usize>,
    incumbent: Option<f64>,
    first_incumbent: Option<f64>,
    root_lp: Option<f64>,
    finished: Option<Proof>,
}

impl Default for TreeState {
    fn default() -> Self {
        Self::new()
    }
}

impl TreeState {
    /// State before anything has been processed: only the root (id 0) is
    /// open, with no bound and no estimate.
    pub fn new() -> Self {
        let mut s = TreeState {
            t: 0,
            open: BTreeMap::new(),
            by_bound: BTreeSet::new(),
            by_estimate: BTreeSet::new(),
            depth_open: Vec::new(),
            depth_processed_min: Vec::new(),
            rank1: 0,
            inner: 0,
            leaves: 0,
            created: 0,
            omega: 0.0,
            open_history: vec![1],
            incumbent: None,
            first_incumbent: None,
            root_lp: None,
            finished: None,
        };
        let root = ChildInfo { id: 0, depth: 0, bound: f64::NEG_INFINITY, estimate: f64::NEG_INFINITY };
        s.insert_open(0, root).expect("fresh state");
        s
    }

    /// Rebuilds the state from a complete or partial event log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a TreeEvent>) -> Result<Self, TreeError> {
        let mut s = TreeState::new();
        for ev in events {
            s.apply(ev)?;
        }
        Ok(s)
    }

    pub fn apply(&mut self, ev: &TreeEvent) -> Result<(), TreeError> {
        let t = ev.t;
        match &ev.kind {
            EventKind::NodeProcessed { open_count, .. } => {
                if t != self.t + 1 {
                    return Err(TreeError::TimeOutOfOrder { t, expected: self.t + 1 });
                }
                if *open_count != self.open.len() {
                    return Err(TreeError::OpenCountMismatch { t, logged: *open_count, tracked: self.open.len() });
                }
            }
            _ => {
                // Events of a node being processed already carry its time.
                if t != self.t && t != self.t + 1 {
                    return Err(TreeError::TimeOutOfOrder { t, expected: self.t + 1 });
                }
            }
        }
        match &ev.kind {
            EventKind::Branched { node, down, up, .. } => {
                self.close(t, *node, true)?;
                self.inner += 1;
                self.insert_open(t, *down)?;
                self.insert_open(t, *up)?;
            }
            EventKind::Pruned { node, processed, .. } => {
                let n = self.close(t, *node, *processed)?;
                self.leaves += 1;
                self.omega += libm::ldexp(1.0, -(n.depth as i32));
            }
            EventKind::NewIncumbent { z, .. } => {
                self.incumbent = Some(*z);
                if self.first_incumbent.is_none() {
                    self.first_incumbent = Some(*z);
                }
            }
            EventKind::NodeProcessed { node, z_lp, .. } => {
                if *node == 0 {
                    self.root_lp = Some(*z_lp);
                }
                self.t = t;
                self.open_history.push(self.open.len());
            }
            EventKind::Finished { proof, .. } => {
                self.finished = Some(*proof);
            }
        }
        Ok(())
    }

    fn insert_open(&mut self, t: usize, c: ChildInfo) -> Result<(), TreeError> {
        if self.open.contains_key(&c.id) {
            return Err(TreeError::DuplicateNode { t, node: c.id });
        }
        self.open.insert(c.id, OpenNode { depth: c.depth, bound: c.bound, estimate: c.estimate });
        self.by_bound.insert((Key(c.bound), c.id));
        self.by_estimate.insert((Key(c.estimate), c.id));
        while self.depth_open.len() <= c.depth {
            self.depth_open.push(BTreeSet::new());
            self.depth_processed_min.push(f64::INFINITY);
        }
        self.depth_open[c.depth].insert((Key(c.estimate), c.id));
        if c.estimate <= self.depth_processed_min[c.depth] {
            self.rank1 += 1;
        }
        self.created += 1;
        Ok(())
    }

    /// Removes an open node; a processed node also lowers its depth's
    /// processed-estimate minimum.
    fn close(&mut self, t: usize, id: usize, processed: bool) -> Result<OpenNode, TreeError> {
        let n = self.open.remove(&id).ok_or(TreeError::UnknownNode { t, node: id })?;
        self.by_bound.remove(&(Key(n.bound), id));
        self.by_estimate.remove(&(Key(n.estimate), id));
        let d = n.depth;
        self.depth_open[d].remove(&(Key(n.estimate), id));
        let old_min = self.depth_processed_min[d];
        if n.estimate <= old_min {
            self.rank1 -= 1;
        }
        if processed && n.estimate < old_min {
            // Open nodes with estimate in (new_min, old_min] no longer count.
            let dropped = self.depth_open[d]
                .range((Key(n.estimate), usize::MAX)..)
                .take_while(|(k, _)| k.0 <= old_min)
                .filter(|(k, _)| k.0 > n.estimate)
                .count();
            self.rank1 -= dropped;
            self.depth_processed_min[d] = n.estimate;
        }
        Ok(n)
    }

    /// Processed-node count.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn open_count(&self) -> usize {
        self.open.len()
    }

    pub fn inner_count(&self) -> usize {
        self.inner
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Nodes ever created, root included.
    pub fn created_count(&self) -> usize {
        self.created
    }

    /// Σ 2^{−depth} over the leaves.
    pub fn tree_weight(&self) -> f64 {
        self.omega
    }

    /// Smallest LP bound over open nodes; `+∞` when none are open.
    pub fn global_lower(&self) -> f64 {
        self.by_bound.first().map_or(f64::INFINITY, |(k, _)| k.0)
    }

    /// Best-bound open node: smallest LP bound, then greater depth, then
    /// lower id.
    pub fn select_node(&self) -> Option<usize> {
        let (first, _) = self.by_bound.first()?;
        self.by_bound
            .iter()
            .take_while(|(k, _)| k.0 == first.0)
            .map(|&(_, id)| (core::cmp::Reverse(self.open[&id].depth), id))
            .min()
            .map(|(_, id)| id)
    }

    /// Smallest estimate over open nodes; `+∞` when none are open.
    pub fn best_estimate_min(&self) -> f64 {
        self.by_estimate.first().map_or(f64::INFINITY, |(k, _)| k.0)
    }

    /// Number of open nodes whose estimate is no worse than every processed
    /// node at the same depth.
    pub fn rank1_count(&self) -> usize {
        self.rank1
    }

    /// Median of the open LP bounds (mean of the middle two for an even
    /// count); `None` when nothing is open.
    pub fn median_open_bound(&self) -> Option<f64> {
        let n = self.by_bound.len();
        if n == 0 {
            return None;
        }
        let mut it = self.by_bound.iter().skip((n - 1) / 2);
        let a = it.next()?.0 .0;
        if n % 2 == 1 {
            Some(a)
        } else {
            let b = it.next()?.0 .0;
            Some(0.5 * (a + b))
        }
    }

    pub fn open_bounds(&self) -> impl Iterator<Item = f64> + '_ {
        self.by_bound.iter().map(|(k, _)| k.0)
    }

    /// Open ids with `(depth, bound, estimate)`, ascending by id.
    pub fn open_nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.open.iter().map(|(&id, n)| (id, n.depth, n.bound, n.estimate))
    }

    /// `open_history()[k]` is |O_k|, the open count after `k` processed
    /// nodes (index 0 is the initial root-only tree).
    pub fn open_history(&self) -> &[usize] {
        &self.open_history
    }

    pub fn incumbent(&self) -> Option<f64> {
        self.incumbent
    }

    pub fn first_incumbent(&self) -> Option<f64> {
        self.first_incumbent
    }

    pub fn root_lp(&self) -> Option<f64> {
        self.root_lp
    }

    pub fn finished(&self) -> Option<Proof> {
        self.finished
    }

    /// Recomputes |R¹| from scratch; used to check the incremental count.
    pub fn rank1_count_naive(&self) -> usize {
        self.open
            .values()
            .filter(|n| n.estimate <= self.depth_processed_min.get(n.depth).copied().unwrap_or(f64::INFINITY))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn child(id: usize, depth: usize, bound: f64, estimate: f64) -> ChildInfo {
        ChildInfo { id, depth, bound, estimate }
    }

    fn ev(t: usize, kind: EventKind) -> TreeEvent {
        TreeEvent { t, kind }
    }

    fn small_log() -> Vec<TreeEvent> {
        vec![
            ev(1, EventKind::Branched { node: 0, var: 2, down: child(1, 1, 3.0, 4.0), up: child(2, 1, 3.0, 4.0) }),
            ev(1, EventKind::NodeProcessed { node: 0, depth: 0, z_lp: 3.0, open_count: 2 }),
            ev(2, EventKind::NewIncumbent { node: 1, z: 5.0 }),
            ev(2, EventKind::Pruned { node: 1, reason: PruneReason::IntegerFeasible, processed: true }),
            ev(2, EventKind::NodeProcessed { node: 1, depth: 1, z_lp: 5.0, open_count: 1 }),
            ev(3, EventKind::Branched { node: 2, var: 0, down: child(3, 2, 3.5, 4.5), up: child(4, 2, 3.5, 4.5) }),
            ev(3, EventKind::NodeProcessed { node: 2, depth: 1, z_lp: 3.5, open_count: 2 }),
            ev(4, EventKind::Pruned { node: 3, reason: PruneReason::Infeasible, processed: true }),
            ev(4, EventKind::NodeProcessed { node: 3, depth: 2, z_lp: f64::INFINITY, open_count: 1 }),
            ev(5, EventKind::Pruned { node: 4, reason: PruneReason::PrunedByBound, processed: true }),
            ev(5, EventKind::NodeProcessed { node: 4, depth: 2, z_lp: 6.0, open_count: 0 }),
            ev(5, EventKind::Finished { proof: Proof::OptimalityProved, z_star: 5.0 }),
        ]
    }

    #[test]
    fn small_log_closes_the_tree() {
        let s = TreeState::replay(&small_log()).unwrap();
        assert_eq!(s.t(), 5);
        assert_eq!(s.tree_weight(), 1.0);
        assert_eq!(s.inner_count() + s.leaf_count() + s.open_count(), s.created_count());
        assert_eq!(s.open_history(), &[1, 2, 1, 2, 1, 0]);
        assert_eq!(s.global_lower(), f64::INFINITY);
        assert_eq!(s.first_incumbent(), Some(5.0));
        assert_eq!(s.root_lp(), Some(3.0));
        assert_eq!(s.finished(), Some(Proof::OptimalityProved));
    }

    #[test]
    fn rank1_tracks_processed_minimum_per_depth() {
        let log = small_log();
        let s = TreeState::replay(&log[..2]).unwrap();
        // Depth 1 has no processed nodes yet.
        assert_eq!(s.rank1_count(), 2);
        let s = TreeState::replay(&log[..5]).unwrap();
        // Node 2 has estimate 4.0 = processed minimum 4.0 at depth 1.
        assert_eq!(s.rank1_count(), 1);
        assert_eq!(s.rank1_count(), s.rank1_count_naive());
    }

    #[test]
    fn median_uses_middle_pair_for_even_sets() {
        let mut s = TreeState::new();
        s.apply(&ev(1, EventKind::Branched { node: 0, var: 0, down: child(1, 1, 6.0, 6.0), up: child(2, 1, 8.0, 8.0) }))
            .unwrap();
        assert_eq!(s.median_open_bound(), Some(7.0));
        assert_eq!(s.global_lower(), 6.0);
        assert_eq!(s.best_estimate_min(), 6.0);
    }

    #[test]
    fn selection_prefers_low_bound_then_depth() {
        let mut s = TreeState::new();
        s.apply(&ev(1, EventKind::Branched { node: 0, var: 0, down: child(1, 1, 5.0, 5.0), up: child(2, 1, 3.0, 3.0) }))
            .unwrap();
        s.apply(&ev(1, EventKind::NodeProcessed { node: 0, depth: 0, z_lp: 1.0, open_count: 2 })).unwrap();
        s.apply(&ev(2, EventKind::Branched { node: 1, var: 1, down: child(3, 2, 7.0, 7.0), up: child(4, 2, 3.0, 3.0) }))
            .unwrap();
        // Bounds {3@1, 7@2, 3@2}: the deeper tie wins.
        assert_eq!(s.select_node(), Some(4));
    }

    #[test]
    fn unknown_node_is_rejected() {
        let mut s = TreeState::new();
        let err = s.apply(&ev(1, EventKind::Pruned { node: 9, reason: PruneReason::Infeasible, processed: true }));
        assert_eq!(err, Err(TreeError::UnknownNode { t: 1, node: 9 }));
    }
}
