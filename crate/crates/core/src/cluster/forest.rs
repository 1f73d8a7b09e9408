use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{EdgeId, Graph, NodeId};

/// Rooted cluster trees over a subset of the nodes.
///
/// Every member has a parent pointer (`None` at the center) along an edge of the graph.
/// Nodes outside the forest have no center.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterForest {
    parent: Vec<Option<NodeId>>,
    center: Vec<Option<NodeId>>,
    depth: Vec<u32>,
}

/// Reasons a parent map is not a valid forest.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ForestError {
    /// Following parents from this node never reaches a root.
    #[error("parent pointers from node {0} form a cycle")]
    Cycle(NodeId),
    /// The parent pointer is not an edge of the graph.
    #[error("parent of {node} is {parent}, which is not a neighbor")]
    NotAnEdge {
        /// Child.
        node: NodeId,
        /// Claimed parent.
        parent: NodeId,
    },
    /// A member points to a node outside the forest.
    #[error("parent of {node} is {parent}, which is not a member")]
    ParentOutside {
        /// Child.
        node: NodeId,
        /// Claimed parent.
        parent: NodeId,
    },
    /// Wrong vector length.
    #[error("expected {expected} entries, got {got}")]
    Length {
        /// Node count.
        expected: usize,
        /// Supplied.
        got: usize,
    },
}

impl ClusterForest {
    /// Every node is its own center.
    pub fn singletons(n: usize) -> Self {
        ClusterForest { parent: vec![None; n], center: (0..n).map(Some).collect(), depth: vec![0; n] }
    }

    /// A forest with no members.
    pub fn empty(n: usize) -> Self {
        ClusterForest { parent: vec![None; n], center: vec![None; n], depth: vec![0; n] }
    }

    /// Builds a forest from parent pointers. `member[v]` says whether `v` belongs to the forest.
    pub fn from_parents(g: &Graph, parent: Vec<Option<NodeId>>, member: &[bool]) -> Result<Self, ForestError> {
        let n = g.n();
        if parent.len() != n || member.len() != n {
            return Err(ForestError::Length { expected: n, got: parent.len().min(member.len()) });
        }
        for v in 0..n {
            if let (true, Some(p)) = (member[v], parent[v]) {
                if !member[p] {
                    return Err(ForestError::ParentOutside { node: v, parent: p });
                }
                if g.edge_between(v, p).is_none() {
                    return Err(ForestError::NotAnEdge { node: v, parent: p });
                }
            }
        }
        let mut center = vec![None; n];
        let mut depth = vec![0u32; n];
        let mut state = vec![0u8; n]; // 0 unvisited, 1 on stack, 2 done
        let mut stack = Vec::new();
        for s in 0..n {
            if !member[s] || state[s] == 2 {
                continue;
            }
            let mut v = s;
            loop {
                if state[v] == 2 {
                    break;
                }
                if state[v] == 1 {
                    return Err(ForestError::Cycle(v));
                }
                state[v] = 1;
                stack.push(v);
                match parent[v] {
                    Some(p) => v = p,
                    None => {
                        center[v] = Some(v);
                        depth[v] = 0;
                        state[v] = 2;
                        stack.pop();
                        break;
                    }
                }
            }
            while let Some(u) = stack.pop() {
                let p = parent[u].expect("non-root on stack");
                center[u] = center[p];
                depth[u] = depth[p] + 1;
                state[u] = 2;
            }
        }
        let parent = (0..n).map(|v| if member[v] { parent[v] } else { None }).collect();
        Ok(ClusterForest { parent, center, depth })
    }

    /// Node count of the underlying graph.
    pub fn n(&self) -> usize {
        self.parent.len()
    }

    /// Parent of `v`, `None` at centers and outside the forest.
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    /// All parent pointers.
    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parent
    }

    /// Center of the cluster containing `v`.
    pub fn center(&self, v: NodeId) -> Option<NodeId> {
        self.center[v]
    }

    /// All centers, per node.
    pub fn centers(&self) -> &[Option<NodeId>] {
        &self.center
    }

    /// Hops from `v` to its center.
    pub fn depth(&self, v: NodeId) -> u32 {
        self.depth[v]
    }

    /// Whether `v` is in some cluster.
    pub fn contains(&self, v: NodeId) -> bool {
        self.center[v].is_some()
    }

    /// Whether `v` is a center.
    pub fn is_center(&self, v: NodeId) -> bool {
        self.center[v] == Some(v)
    }

    /// Largest depth over all members.
    pub fn max_depth(&self) -> u32 {
        (0..self.n()).filter(|&v| self.contains(v)).map(|v| self.depth[v]).max().unwrap_or(0)
    }

    /// Number of members.
    pub fn member_count(&self) -> usize {
        self.center.iter().filter(|c| c.is_some()).count()
    }

    /// Clusters as `(center, members)`, ordered by center; members ascending.
    pub fn clusters(&self) -> Vec<(NodeId, Vec<NodeId>)> {
        let n = self.n();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<(NodeId, Vec<NodeId>)> = Vec::new();
        for c in (0..n).filter(|&v| self.is_center(v)) {
            slot[c] = out.len();
            out.push((c, Vec::new()));
        }
        for v in 0..n {
            if let Some(c) = self.center[v] {
                out[slot[c]].1.push(v);
            }
        }
        out
    }

    /// `v, parent(v), ..., center(v)`.
    pub fn path_to_center(&self, v: NodeId) -> Vec<NodeId> {
        let mut path = vec![v];
        let mut u = v;
        while let Some(p) = self.parent[u] {
            path.push(p);
            u = p;
        }
        path
    }

    /// Children lists, ascending.
    pub fn children(&self) -> Vec<Vec<NodeId>> {
        let mut ch = vec![Vec::new(); self.n()];
        for v in 0..self.n() {
            if let Some(p) = self.parent[v] {
                ch[p].push(v);
            }
        }
        ch
    }

    /// Size of the subtree rooted at each member (0 outside the forest).
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let n = self.n();
        let mut size: Vec<usize> = (0..n).map(|v| usize::from(self.contains(v))).collect();
        let mut order: Vec<NodeId> = (0..n).filter(|&v| self.contains(v)).collect();
        order.sort_by_key(|&v| core::cmp::Reverse(self.depth[v]));
        for v in order {
            if let Some(p) = self.parent[v] {
                size[p] += size[v];
            }
        }
        size
    }

    /// Tree edges, ascending.
    pub fn tree_edges(&self, g: &Graph) -> Vec<EdgeId> {
        let mut es: Vec<EdgeId> =
            (0..self.n()).filter_map(|v| self.parent[v].map(|p| g.edge_between(v, p).expect("forest edge"))).collect();
        es.sort_unstable();
        es
    }

    /// Makes `v` the center of its own subtree.
    pub(crate) fn detach(&mut self, v: NodeId) {
        self.parent[v] = None;
        // Recompute center and depth of the detached subtree.
        let ch = self.children();
        let mut stack = vec![(v, 0u32)];
        while let Some((u, d)) = stack.pop() {
            self.center[u] = Some(v);
            self.depth[u] = d;
            for &c in &ch[u] {
                stack.push((c, d + 1));
            }
        }
    }
}
