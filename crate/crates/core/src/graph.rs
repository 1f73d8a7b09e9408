//! Immutable graphs with canonical edge identities, plus deterministic generators.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::random::RandomStream;

/// Node identifier, dense in `[0, n)`.
pub type NodeId = usize;
/// Edge identifier: index into [`Graph::edges`].
pub type EdgeId = usize;

/// One stored edge. For undirected graphs `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    /// Tail (smaller endpoint when undirected).
    pub u: NodeId,
    /// Head (larger endpoint when undirected).
    pub v: NodeId,
    /// Optional nonnegative weight.
    pub w: Option<u64>,
}

/// Errors raised while building graphs.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GraphError {
    /// A graph needs at least one node.
    #[error("graph must have at least one node")]
    Empty,
    /// Edge endpoint outside `[0, n)`.
    #[error("node id {id} out of range for n = {n}")]
    OutOfRange {
        /// Offending id.
        id: usize,
        /// Node count.
        n: usize,
    },
    /// `u == v`.
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    /// Same (canonical) edge listed twice.
    #[error("duplicate edge ({0}, {1})")]
    Duplicate(NodeId, NodeId),
    /// Some edges carry weights and others do not.
    #[error("edges must be either all weighted or all unweighted")]
    MixedWeights,
    /// Edge probability outside `[0, 1]`.
    #[error("invalid edge probability {0}")]
    InvalidProbability(f64),
    /// Weight range `[lo, hi]` is empty or contains zero.
    #[error("invalid weight range [{0}, {1}]")]
    InvalidWeights(u64, u64),
}

/// Immutable graph on nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
    adj: Vec<Vec<(NodeId, EdgeId)>>,
}

impl Graph {
    /// Builds a graph, canonicalising orientation (undirected) and sorting edges.
    pub fn new(n: usize, directed: bool, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut edges = edges;
        let weighted = edges.first().map(|e| e.w.is_some());
        for e in edges.iter_mut() {
            for id in [e.u, e.v] {
                if id >= n {
                    return Err(GraphError::OutOfRange { id, n });
                }
            }
            if e.u == e.v {
                return Err(GraphError::SelfLoop(e.u));
            }
            if Some(e.w.is_some()) != weighted {
                return Err(GraphError::MixedWeights);
            }
            if !directed && e.u > e.v {
                core::mem::swap(&mut e.u, &mut e.v);
            }
        }
        edges.sort();
        for pair in edges.windows(2) {
            if pair[0].u == pair[1].u && pair[0].v == pair[1].v {
                return Err(GraphError::Duplicate(pair[0].u, pair[0].v));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            adj[e.u].push((e.v, id));
            if !directed {
                adj[e.v].push((e.u, id));
            }
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        Ok(Graph { n, directed, edges, adj })
    }

    /// Unweighted, undirected graph from endpoint pairs.
    pub fn from_pairs(n: usize, pairs: &[(NodeId, NodeId)]) -> Result<Self, GraphError> {
        let edges = pairs.iter().map(|&(u, v)| Edge { u, v, w: None }).collect();
        Graph::new(n, false, edges)
    }

    /// Weighted, undirected graph from `(u, v, w)` triples.
    pub fn from_weighted(n: usize, triples: &[(NodeId, NodeId, u64)]) -> Result<Self, GraphError> {
        let edges = triples.iter().map(|&(u, v, w)| Edge { u, v, w: Some(w) }).collect();
        Graph::new(n, false, edges)
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Whether edges are directed.
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Whether edges carry weights.
    pub fn is_weighted(&self) -> bool {
        self.edges.first().is_some_and(|e| e.w.is_some())
    }

    /// All edges, sorted; the position is the [`EdgeId`].
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge by id.
    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    /// Neighbors of `v` (out-neighbors when directed), sorted by id, with edge ids.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adj[v]
    }

    /// Adjacency list length.
    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    /// Edge joining `u` and `v`, if any.
    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let list = &self.adj[u];
        list.binary_search_by_key(&v, |&(x, _)| x).ok().map(|i| list[i].1)
    }

    /// Weight of edge `e`, treating unweighted edges as weight 1.
    pub fn weight(&self, e: EdgeId) -> u64 {
        self.edges[e].w.unwrap_or(1)
    }

    /// The endpoint of `e` that is not `v`.
    pub fn other(&self, e: EdgeId, v: NodeId) -> NodeId {
        let ed = self.edges[e];
        if ed.u == v {
            ed.v
        } else {
            ed.u
        }
    }

    /// Connected component label per node (labels are the smallest node id in the component).
    pub fn component_labels(&self) -> Vec<NodeId> {
        let mut label = vec![usize::MAX; self.n];
        let mut queue = VecDeque::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            queue.push_back(s);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in self.neighbors(x) {
                    if label[y] == usize::MAX {
                        label[y] = s;
                        queue.push_back(y);
                    }
                }
            }
        }
        label
    }

    /// Number of connected components (of the underlying undirected graph when undirected).
    pub fn component_count(&self) -> usize {
        let labels = self.component_labels();
        labels.iter().enumerate().filter(|&(i, &l)| i == l).count()
    }

    /// Whether the graph is connected.
    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Hop distances from `s`; `None` for unreachable nodes.
    pub fn bfs_hops(&self, s: NodeId) -> Vec<Option<u64>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[s] = Some(0);
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap_or(0);
            for &(y, _) in self.neighbors(x) {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Copy of this graph with all weights dropped.
    pub fn unweighted(&self) -> Graph {
        let edges = self.edges.iter().map(|e| Edge { w: None, ..*e }).collect();
        Graph::new(self.n, self.directed, edges).expect("same structure stays valid")
    }

    /// Copy of this graph with weights drawn uniformly from `[lo, hi]`.
    pub fn with_random_weights(&self, lo: u64, hi: u64, seed: u64) -> Result<Graph, GraphError> {
        if lo == 0 || lo > hi {
            return Err(GraphError::InvalidWeights(lo, hi));
        }
        let mut rng = RandomStream::new(seed).derive("weights", 0).rng();
        let edges = self.edges.iter().map(|e| Edge { w: Some(rng.gen_range(lo..=hi)), ..*e }).collect();
        Graph::new(self.n, self.directed, edges)
    }

    /// Copy with weights drawn from the default range `[1, n²]`.
    pub fn with_default_weights(&self, seed: u64) -> Graph {
        let hi = (self.n as u64 * self.n as u64).max(1);
        self.with_random_weights(1, hi, seed).expect("default range is valid")
    }
}

/// Generator families.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum GraphKind {
    /// `0 - 1 - ... - (n-1)`.
    Path,
    /// Row-major grid with `⌈√n⌉` columns, truncated to `n` nodes.
    Grid,
    /// Complete graph.
    Clique,
    /// Erdős–Rényi `G(n, p)`.
    Gnp {
        /// Edge probability.
        p: f64,
    },
    /// Random bipartite graph: left part `0..⌈n/2⌉`, right part the rest, each cross pair with probability `p`.
    BipartiteGnp {
        /// Edge probability.
        p: f64,
    },
}

/// Generates a graph of the given family; deterministic per `seed`.
pub fn generate(kind: GraphKind, n: usize, seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut pairs = Vec::new();
    match kind {
        GraphKind::Path => {
            for i in 1..n {
                pairs.push((i - 1, i));
            }
        }
        GraphKind::Grid => {
            let cols = crate::math::ceil_usize(crate::math::sqrt(n as f64)).max(1);
            for i in 0..n {
                if (i + 1) % cols != 0 && i + 1 < n {
                    pairs.push((i, i + 1));
                }
                if i + cols < n {
                    pairs.push((i, i + cols));
                }
            }
        }
        GraphKind::Clique => {
            for u in 0..n {
                for v in u + 1..n {
                    pairs.push((u, v));
                }
            }
        }
        GraphKind::Gnp { p } => {
            check_p(p)?;
            let mut rng = RandomStream::new(seed).derive("gnp", n as u64).rng();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(p) {
                        pairs.push((u, v));
                    }
                }
            }
        }
        GraphKind::BipartiteGnp { p } => {
            return bipartite_gnp(n.div_ceil(2), n / 2, p, seed);
        }
    }
    Graph::from_pairs(n, &pairs)
}

/// Random bipartite graph with parts `0..left` and `left..left+right`.
pub fn bipartite_gnp(left: usize, right: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    check_p(p)?;
    let n = left + right;
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut rng = RandomStream::new(seed).derive("bipartite", ((left as u64) << 32) | right as u64).rng();
    let mut pairs = Vec::new();
    for u in 0..left {
        for v in left..n {
            if rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    Graph::from_pairs(n, &pairs)
}

/// Resamples `G(n, p)` under derived seeds until the result is connected.
///
/// Returns the graph and the number of extra attempts used.
pub fn connected_gnp(n: usize, p: f64, seed: u64, max_attempts: u32) -> Result<Option<(Graph, u32)>, GraphError> {
    for attempt in 0..max_attempts.max(1) {
        let s = if attempt == 0 { seed } else { RandomStream::new(seed).derive("resample", attempt as u64).seed_u64() };
        let g = generate(GraphKind::Gnp { p }, n, s)?;
        if g.is_connected() {
            return Ok(Some((g, attempt)));
        }
    }
    Ok(None)
}

fn check_p(p: f64) -> Result<(), GraphError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(GraphError::InvalidProbability(p));
    }
    Ok(())
}

/// Two-colouring of an undirected graph, if it is bipartite.
pub fn bipartition(g: &Graph) -> Option<Vec<bool>> {
    let mut side: Vec<Option<bool>> = vec![None; g.n()];
    let mut queue = VecDeque::new();
    for s in 0..g.n() {
        if side[s].is_some() {
            continue;
        }
        side[s] = Some(false);
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let sx = side[x].unwrap_or(false);
            for &(y, _) in g.neighbors(x) {
                match side[y] {
                    None => {
                        side[y] = Some(!sx);
                        queue.push_back(y);
                    }
                    Some(sy) if sy == sx => return None,
                    _ => {}
                }
            }
        }
    }
    Some(side.into_iter().map(|s| s.unwrap_or(false)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_three() {
        let g = generate(GraphKind::Path, 3, 0).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn clique_four() {
        assert_eq!(generate(GraphKind::Clique, 4, 0).unwrap().m(), 6);
    }

    #[test]
    fn gnp_edge_count_window() {
        let g = generate(GraphKind::Gnp { p: 0.5 }, 64, 7).unwrap();
        assert!((800..=1216).contains(&g.m()), "m = {}", g.m());
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(generate(GraphKind::Path, 0, 0), Err(GraphError::Empty));
        assert!(matches!(generate(GraphKind::Gnp { p: 1.5 }, 4, 0), Err(GraphError::InvalidProbability(_))));
        assert!(matches!(generate(GraphKind::Gnp { p: -0.1 }, 4, 0), Err(GraphError::InvalidProbability(_))));
        assert_eq!(Graph::from_pairs(3, &[(0, 0)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(Graph::from_pairs(3, &[(0, 1), (1, 0)]), Err(GraphError::Duplicate(0, 1)));
        assert_eq!(Graph::from_pairs(3, &[(0, 3)]), Err(GraphError::OutOfRange { id: 3, n: 3 }));
    }

    #[test]
    fn grid_shape() {
        let g = generate(GraphKind::Grid, 9, 0).unwrap();
        assert_eq!(g.m(), 12);
        assert!(g.is_connected());
        let g = generate(GraphKind::Grid, 7, 0).unwrap();
        assert!(g.is_connected());
    }

    #[test]
    fn components_and_bipartite() {
        let g = Graph::from_pairs(5, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.component_count(), 3);
        let b = generate(GraphKind::BipartiteGnp { p: 0.4 }, 20, 3).unwrap();
        let side = bipartition(&b).unwrap();
        for e in b.edges() {
            assert_ne!(side[e.u], side[e.v]);
        }
        assert!(bipartition(&generate(GraphKind::Clique, 3, 0).unwrap()).is_none());
    }

    #[test]
    fn edge_lookup() {
        let g = Graph::from_weighted(3, &[(2, 1, 4), (0, 1, 9)]).unwrap();
        let e = g.edge_between(2, 1).unwrap();
        assert_eq!(g.edge(e), Edge { u: 1, v: 2, w: Some(4) });
        assert_eq!(g.other(e, 1), 2);
        assert_eq!(g.edge_between(0, 2), None);
    }
}
