use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Input description of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub parent: Option<NodeId>,
    pub time_index: usize,
    /// probability of this node given its parent (ignored for the root)
    pub cond_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub time_index: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub cond_prob: f64,
}

/// Finite filtered probability space: the atoms of the filtration at time
/// `t_i` are the nodes with `time_index == i`.
///
/// Terminal nodes are numbered in depth-first order, so the terminal
/// descendants of any node form a contiguous range of path indices.
#[derive(Debug, Clone)]
pub struct EventTree {
    nodes: Vec<Node>,
    time_grid: Vec<f64>,
    root: NodeId,
    path_prob: Vec<f64>,
    terminals: Vec<NodeId>,
    terminal_range: Vec<Range<usize>>,
    by_time: Vec<Vec<NodeId>>,
}

impl EventTree {
    /// Builds the tree and checks its structure (single root, no orphans,
    /// consecutive time indices, all leaves at the horizon). Probabilities
    /// are not checked here; see `validate_scenario`.
    pub fn new(specs: &[NodeSpec], time_grid: Vec<f64>) -> Result<Self> {
        if time_grid.is_empty() {
            return Err(Error::Tree("empty time grid".into()));
        }
        if time_grid.iter().any(|t| !t.is_finite()) || time_grid[0] != 0.0 {
            return Err(Error::Tree(
                "time grid must start at 0 and be finite".into(),
            ));
        }
        if time_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Tree("time grid must be strictly increasing".into()));
        }
        if specs.is_empty() {
            return Err(Error::Tree("no nodes".into()));
        }
        let horizon = time_grid.len() - 1;
        let n = specs.len();
        let mut nodes: Vec<Node> = specs
            .iter()
            .map(|s| Node {
                time_index: s.time_index,
                parent: s.parent,
                children: Vec::new(),
                cond_prob: s.cond_prob,
            })
            .collect();
        let mut root = None;
        for (id, s) in specs.iter().enumerate() {
            if s.time_index > horizon {
                return Err(Error::Tree(format!(
                    "node {id}: time index {} beyond horizon {horizon}",
                    s.time_index
                )));
            }
            match s.parent {
                None => {
                    if s.time_index != 0 {
                        return Err(Error::Tree(format!(
                            "node {id}: orphan (no parent) at time index {}",
                            s.time_index
                        )));
                    }
                    if let Some(r) = root {
                        return Err(Error::Tree(format!("nodes {r} and {id} are both roots")));
                    }
                    root = Some(id);
                }
                Some(p) => {
                    if p >= n {
                        return Err(Error::Tree(format!("node {id}: parent {p} does not exist")));
                    }
                    if specs[p].time_index + 1 != s.time_index {
                        return Err(Error::Tree(format!(
                            "node {id}: time index {} does not follow parent {p} at {}",
                            s.time_index, specs[p].time_index
                        )));
                    }
                    nodes[p].children.push(id);
                }
            }
        }
        let root = root.ok_or_else(|| Error::Tree("no root node at time index 0".into()))?;
        for (id, node) in nodes.iter().enumerate() {
            if node.children.is_empty() && node.time_index != horizon {
                return Err(Error::Tree(format!(
                    "node {id}: leaf at time index {} before horizon {horizon}",
                    node.time_index
                )));
            }
        }

        let mut path_prob = vec![0.0; n];
        let mut terminals = Vec::new();
        let mut terminal_range = vec![0..0; n];
        let mut by_time = vec![Vec::new(); horizon + 1];
        let mut visited = 0usize;
        // iterative DFS with post-order range fix-up
        let mut stack: Vec<(NodeId, bool)> = vec![(root, false)];
        let mut start = vec![0usize; n];
        path_prob[root] = 1.0;
        while let Some((id, done)) = stack.pop() {
            if done {
                terminal_range[id] = start[id]..terminals.len();
                continue;
            }
            visited += 1;
            by_time[nodes[id].time_index].push(id);
            start[id] = terminals.len();
            if nodes[id].children.is_empty() {
                terminals.push(id);
                terminal_range[id] = start[id]..terminals.len();
                continue;
            }
            stack.push((id, true));
            for &c in nodes[id].children.iter().rev() {
                path_prob[c] = path_prob[id] * nodes[c].cond_prob;
                stack.push((c, false));
            }
        }
        if visited != n {
            return Err(Error::Tree(
                "some nodes are unreachable from the root".into(),
            ));
        }
        for level in &mut by_time {
            level.sort_unstable();
        }
        Ok(Self {
            nodes,
            time_grid,
            root,
            path_prob,
            terminals,
            terminal_range,
            by_time,
        })
    }

    /// Full tree in which every non-terminal node has one child per entry of
    /// `branch_probs`. Node ids are assigned breadth first.
    pub fn uniform(time_grid: Vec<f64>, branch_probs: &[f64]) -> Result<Self> {
        if branch_probs.is_empty() {
            return Err(Error::Tree("no branches".into()));
        }
        let horizon = time_grid.len().saturating_sub(1);
        let mut specs = vec![NodeSpec {
            parent: None,
            time_index: 0,
            cond_prob: 1.0,
        }];
        let mut frontier = vec![0usize];
        for t in 1..=horizon {
            let mut next = Vec::new();
            for &p in &frontier {
                for &pr in branch_probs {
                    next.push(specs.len());
                    specs.push(NodeSpec {
                        parent: Some(p),
                        time_index: t,
                        cond_prob: pr,
                    });
                }
            }
            frontier = next;
        }
        Self::new(&specs, time_grid)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of periods `N`.
    pub fn horizon(&self) -> usize {
        self.time_grid.len() - 1
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn time(&self, id: NodeId) -> f64 {
        self.time_grid[self.nodes[id].time_index]
    }

    pub fn time_index(&self, id: NodeId) -> usize {
        self.nodes[id].time_index
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// ℙ of the event represented by `id`.
    pub fn prob(&self, id: NodeId) -> f64 {
        self.path_prob[id]
    }

    pub fn num_paths(&self) -> usize {
        self.terminals.len()
    }

    /// Terminal node of path `omega`.
    pub fn terminal(&self, omega: usize) -> NodeId {
        self.terminals[omega]
    }

    pub fn terminals(&self) -> &[NodeId] {
        &self.terminals
    }

    /// Path indices of the terminal descendants of `id`.
    pub fn paths_below(&self, id: NodeId) -> Range<usize> {
        self.terminal_range[id].clone()
    }

    pub fn nodes_at(&self, time_index: usize) -> &[NodeId] {
        &self.by_time[time_index]
    }

    /// Nodes from the root down to `id`, inclusive.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Non-terminal nodes in increasing time order (parents first).
    pub fn interior_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_time[..self.horizon()].iter().flatten().copied()
    }

    /// All nodes, parents before children.
    pub fn forward_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_time.iter().flatten().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial() -> EventTree {
        EventTree::uniform(vec![0.0, 1.0, 2.0], &[0.4, 0.6]).unwrap()
    }

    #[test]
    fn uniform_tree_shape() {
        let t = binomial();
        assert_eq!(t.num_nodes(), 7);
        assert_eq!(t.num_paths(), 4);
        assert_eq!(t.horizon(), 2);
        assert_eq!(t.paths_below(1), 0..2);
        assert_eq!(t.paths_below(2), 2..4);
        assert_eq!(t.terminals(), &[3, 4, 5, 6]);
        let total: f64 = t.terminals().iter().map(|&n| t.prob(n)).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((t.prob(6) - 0.36).abs() < 1e-15);
        assert_eq!(t.path_to(5), vec![0, 2, 5]);
    }

    #[test]
    fn orphan_and_gap_errors_name_the_node() {
        let specs = [
            NodeSpec {
                parent: None,
                time_index: 0,
                cond_prob: 1.0,
            },
            NodeSpec {
                parent: None,
                time_index: 1,
                cond_prob: 1.0,
            },
        ];
        let err = EventTree::new(&specs, vec![0.0, 1.0])
            .unwrap_err()
            .to_string();
        assert!(err.contains("node 1") && err.contains("orphan"), "{err}");

        let specs = [
            NodeSpec {
                parent: None,
                time_index: 0,
                cond_prob: 1.0,
            },
            NodeSpec {
                parent: Some(0),
                time_index: 2,
                cond_prob: 1.0,
            },
        ];
        let err = EventTree::new(&specs, vec![0.0, 1.0, 2.0])
            .unwrap_err()
            .to_string();
        assert!(err.contains("node 1"), "{err}");
    }

    #[test]
    fn early_leaf_rejected() {
        let specs = [
            NodeSpec {
                parent: None,
                time_index: 0,
                cond_prob: 1.0,
            },
            NodeSpec {
                parent: Some(0),
                time_index: 1,
                cond_prob: 0.5,
            },
            NodeSpec {
                parent: Some(0),
                time_index: 1,
                cond_prob: 0.5,
            },
            NodeSpec {
                parent: Some(1),
                time_index: 2,
                cond_prob: 1.0,
            },
        ];
        let err = EventTree::new(&specs, vec![0.0, 1.0, 2.0])
            .unwrap_err()
            .to_string();
        assert!(err.contains("node 2") && err.contains("leaf"), "{err}");
    }
}
