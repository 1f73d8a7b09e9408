//! Sequential reference solutions used to check the distributed solvers.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::graph::{Graph, NodeId};

/// Row-major `n × n` distances, `None` for unreachable pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<Option<u64>>,
}

/// A broken matrix invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MatrixViolation {
    /// `d(v, v) ≠ 0`.
    #[error("d({0}, {0}) is not zero")]
    Diagonal(NodeId),
    /// `d(u, v) ≠ d(v, u)`.
    #[error("d({0}, {1}) differs from d({1}, {0})")]
    Asymmetric(NodeId, NodeId),
    /// `d(u, w) > d(u, v) + d(v, w)`.
    #[error("d({0}, {2}) exceeds d({0}, {1}) + d({1}, {2})")]
    Triangle(NodeId, NodeId, NodeId),
}

impl DistanceMatrix {
    /// All entries unknown except the zero diagonal.
    pub fn new(n: usize) -> Self {
        let mut d = vec![None; n * n];
        for v in 0..n {
            d[v * n + v] = Some(0);
        }
        DistanceMatrix { n, d }
    }

    /// Builds a matrix from rows; `rows[u][v]` is `d(u, v)`.
    pub fn from_rows(rows: &[Vec<Option<u64>>]) -> Self {
        let n = rows.len();
        let mut d = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "rows must be square");
            d.extend_from_slice(r);
        }
        DistanceMatrix { n, d }
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `d(u, v)`.
    pub fn get(&self, u: NodeId, v: NodeId) -> Option<u64> {
        self.d[u * self.n + v]
    }

    /// Sets `d(u, v)`.
    pub fn set(&mut self, u: NodeId, v: NodeId, d: Option<u64>) {
        self.d[u * self.n + v] = d;
    }

    /// Lowers `d(u, v)` to `d` if that is smaller.
    pub fn relax(&mut self, u: NodeId, v: NodeId, d: u64) {
        let e = &mut self.d[u * self.n + v];
        if e.is_none_or(|x| d < x) {
            *e = Some(d);
        }
    }

    /// Row `u`.
    pub fn row(&self, u: NodeId) -> &[Option<u64>] {
        &self.d[u * self.n..(u + 1) * self.n]
    }

    /// Rows as nested vectors.
    pub fn rows(&self) -> Vec<Vec<Option<u64>>> {
        (0..self.n).map(|u| self.row(u).to_vec()).collect()
    }

    /// Unreachable (or unresolved) entries.
    pub fn infinite_count(&self) -> usize {
        self.d.iter().filter(|x| x.is_none()).count()
    }

    /// Largest finite entry.
    pub fn max_finite(&self) -> Option<u64> {
        self.d.iter().flatten().copied().max()
    }

    /// Entries row-major as little-endian `u64`, `u64::MAX` for unreachable.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.d.len());
        for x in &self.d {
            out.extend_from_slice(&x.unwrap_or(u64::MAX).to_le_bytes());
        }
        out
    }

    /// FNV-1a over [`Self::to_le_bytes`].
    pub fn checksum(&self) -> u64 {
        self.to_le_bytes().iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
    }

    /// Zero diagonal, symmetry (if `symmetric`) and the triangle inequality.
    pub fn check_invariants(&self, symmetric: bool) -> Result<(), MatrixViolation> {
        let n = self.n;
        for v in 0..n {
            if self.get(v, v) != Some(0) {
                return Err(MatrixViolation::Diagonal(v));
            }
        }
        if symmetric {
            for u in 0..n {
                for v in u + 1..n {
                    if self.get(u, v) != self.get(v, u) {
                        return Err(MatrixViolation::Asymmetric(u, v));
                    }
                }
            }
        }
        for u in 0..n {
            for v in 0..n {
                let Some(a) = self.get(u, v) else { continue };
                for w in 0..n {
                    if let Some(b) = self.get(v, w) {
                        if self.get(u, w).is_none_or(|x| x > a.saturating_add(b)) {
                            return Err(MatrixViolation::Triangle(u, v, w));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Hop distances between all pairs.
pub fn bfs_apsp(g: &Graph) -> DistanceMatrix {
    let rows: Vec<Vec<Option<u64>>> = (0..g.n()).map(|s| g.bfs_hops(s)).collect();
    DistanceMatrix::from_rows(&rows)
}

/// Weighted distances between all pairs (unweighted edges count 1).
pub fn dijkstra_apsp(g: &Graph) -> DistanceMatrix {
    let n = g.n();
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let mut dist: Vec<Option<u64>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[s] = Some(0);
        heap.push(Reverse((0u64, s)));
        while let Some(Reverse((d, x))) = heap.pop() {
            if dist[x] != Some(d) {
                continue;
            }
            for &(y, e) in g.neighbors(x) {
                let c = d + g.weight(e);
                if dist[y].is_none_or(|old| c < old) {
                    dist[y] = Some(c);
                    heap.push(Reverse((c, y)));
                }
            }
        }
        rows.push(dist);
    }
    DistanceMatrix::from_rows(&rows)
}

/// Maximum matching of a bipartite graph; `left[v]` gives the side of `v`. Returns the
/// matched pairs as `(left, right)`, sorted.
pub fn hopcroft_karp(g: &Graph, left: &[bool]) -> Vec<(NodeId, NodeId)> {
    const FREE: usize = usize::MAX;
    let n = g.n();
    let mut mate = vec![FREE; n];
    let lefts: Vec<NodeId> = (0..n).filter(|&v| left[v]).collect();
    let mut layer = vec![u64::MAX; n];
    loop {
        // Layers from the free left nodes.
        let mut queue = VecDeque::new();
        for &u in &lefts {
            layer[u] = if mate[u] == FREE { 0 } else { u64::MAX };
            if mate[u] == FREE {
                queue.push_back(u);
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in g.neighbors(u) {
                let w = mate[v];
                if w == FREE {
                    found = true;
                } else if layer[w] == u64::MAX {
                    layer[w] = layer[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        for &u in &lefts {
            if mate[u] == FREE {
                augment(g, u, &mut mate, &mut layer);
            }
        }
    }
    let mut out: Vec<(NodeId, NodeId)> = lefts.iter().filter(|&&u| mate[u] != FREE).map(|&u| (u, mate[u])).collect();
    out.sort_unstable();
    out
}

fn augment(g: &Graph, u: NodeId, mate: &mut [usize], layer: &mut [u64]) -> bool {
    for &(v, _) in g.neighbors(u) {
        let w = mate[v];
        let ok = if w == usize::MAX { true } else { layer[w] == layer[u] + 1 && augment(g, w, mate, layer) };
        if ok {
            mate[u] = v;
            mate[v] = u;
            return true;
        }
    }
    layer[u] = u64::MAX;
    false
}

/// Whether `pairs` is a matching of `g`: every pair an edge, no node used twice.
pub fn is_matching(g: &Graph, pairs: &[(NodeId, NodeId)]) -> bool {
    let mut used = vec![false; g.n()];
    for &(a, b) in pairs {
        if g.edge_between(a, b).is_none() || used[a] || used[b] {
            return false;
        }
        used[a] = true;
        used[b] = true;
    }
    true
}
