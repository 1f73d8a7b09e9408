//! Low-diameter decompositions with sparse inter-cluster edges, built by exponential shifts.
//!
//! Every node `v` draws a shift `δ_v` with `P(δ_v ≥ k) = e^{-βk}`, truncated at
//! `K = ⌈4 ln n / β⌉`, and starts a wave at time `K − δ_v` unless some wave reached it
//! earlier. A node joins the first wave to reach it (ties to the smaller center id), which is
//! the center maximizing `δ_c − d(c, v)`. Each node broadcasts its center once, so every node
//! learns the cluster of each neighbor and picks one outgoing edge into every neighboring
//! cluster.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::forest::{ClusterForest, ForestError};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::math::{ceil_usize, ln_at_least_one, log2_ceil};
use crate::random::RandomStream;
use crate::sim::{run_bcongest, Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};

const TAG_WAVE: u8 = 30;

/// Bound checked by the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdcBound {
    /// Strong diameter of a cluster.
    Diameter,
    /// Outgoing inter-cluster edges of a node.
    FDegree,
}

/// Failures of [`ldc_decompose`].
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LdcError {
    /// A bound still failed after all retries.
    #[error("{bound:?} bound violated after {attempts} attempts: {value} > {limit}")]
    Bound {
        /// Which bound.
        bound: LdcBound,
        /// Offending value in the last attempt.
        value: u64,
        /// The bound.
        limit: u64,
        /// Attempts made.
        attempts: u32,
    },
    /// `beta` outside `(0, 1)`.
    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    /// Engine failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Malformed cluster trees.
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Parameters of [`ldc_decompose_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdcParams {
    /// Shift rate.
    pub beta: f64,
    /// Multiplier of `⌈log₂ n⌉` in both bounds.
    pub bound_factor: u64,
    /// Attempts before giving up (first try included).
    pub max_attempts: u32,
}

impl Default for LdcParams {
    fn default() -> Self {
        LdcParams { beta: 0.5, bound_factor: 16, max_attempts: 4 }
    }
}

/// A clustering with rooted spanning trees and the outgoing inter-cluster edge set `F`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdcDecomposition {
    /// Cluster trees; every node is a member.
    pub forest: ClusterForest,
    /// Per node, `(neighbor, edge)` for the chosen edge into each neighboring cluster,
    /// ordered by neighbor id.
    pub f_out: Vec<Vec<(NodeId, EdgeId)>>,
    /// Diameter bound.
    pub r_bound: u64,
    /// F-degree bound.
    pub d_bound: u64,
    /// Largest strong diameter measured.
    pub max_diameter: u64,
    /// Largest F-degree.
    pub max_f_degree: usize,
    /// Attempts used (1 if the first seed worked).
    pub attempts: u32,
    /// Cost of all attempts.
    pub metrics: SimMetrics,
}

impl LdcDecomposition {
    /// Center of `v`'s cluster.
    pub fn center(&self, v: NodeId) -> NodeId {
        self.forest.center(v).expect("every node is clustered")
    }
}

/// Truncation level `⌈4 ln n / β⌉`.
pub fn shift_cap(n: usize, beta: f64) -> u64 {
    ceil_usize(4.0 * ln_at_least_one(n) / beta) as u64
}

/// The shift a node draws from its init stream.
pub fn draw_shift(rand: &RandomStream, beta: f64, cap: u64) -> u64 {
    let p = libm::exp(-beta);
    let mut rng = rand.derive("mpx-shift", 0).rng();
    let mut k = 0;
    while k < cap && rng.gen_bool(p) {
        k += 1;
    }
    k
}

/// The wave program.
#[derive(Clone, Copy, Debug)]
pub struct Mpx {
    /// Shift rate.
    pub beta: f64,
}

/// State of [`Mpx`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MpxState {
    start: u64,
    center: Option<NodeId>,
    parent: Option<NodeId>,
    sent: bool,
    heard: Vec<(NodeId, NodeId)>,
}

/// Output of [`Mpx`]: center, parent, and `(neighbor, neighbor's center)` pairs.
pub type MpxOutput = (NodeId, Option<NodeId>, Vec<(NodeId, NodeId)>);

impl NodeProgram for Mpx {
    type Input = ();
    type State = MpxState;
    type Output = MpxOutput;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, _: &(), rand: &RandomStream) -> MpxState {
        let cap = shift_cap(ctx.n(), self.beta);
        let start = cap - draw_shift(rand, self.beta, cap);
        let center = (start == 0).then_some(ctx.id());
        MpxState { start, center, parent: None, sent: false, heard: Vec::new() }
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &MpxState, _round: u64) -> Outbox {
        match s.center {
            Some(c) if !s.sent => Outbox::Broadcast(Message::new(TAG_WAVE, &[c as u64])),
            _ => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut MpxState,
        round: u64,
        inbox: &[(NodeId, Message)],
        _: &RandomStream,
    ) {
        if s.center.is_some() {
            s.sent = true;
        }
        for &(from, m) in inbox {
            if m.tag() == TAG_WAVE {
                s.heard.push((from, m.field(0) as NodeId));
            }
        }
        if s.center.is_none() {
            let wave =
                inbox.iter().filter(|(_, m)| m.tag() == TAG_WAVE).map(|&(from, m)| (m.field(0) as NodeId, from)).min();
            let own = (s.start == round).then_some((ctx.id(), ctx.id()));
            match (wave, own) {
                (Some(w), Some(o)) if o.0 < w.0 => s.center = Some(o.0),
                (Some((c, from)), _) => {
                    s.center = Some(c);
                    s.parent = Some(from);
                }
                (None, Some(o)) => s.center = Some(o.0),
                (None, None) => {}
            }
        }
    }

    fn halted(&self, s: &MpxState) -> bool {
        s.center.is_some() && s.sent
    }

    fn output(&self, s: &MpxState) -> MpxOutput {
        (s.center.expect("all nodes are claimed at the end"), s.parent, s.heard.clone())
    }

    fn output_words(&self, o: &MpxOutput) -> usize {
        2 + o.2.len()
    }
}

/// Strong diameter of every cluster, indexed like [`ClusterForest::clusters`].
pub fn strong_diameters(g: &Graph, forest: &ClusterForest) -> Vec<u64> {
    let n = g.n();
    let mut dist = vec![u64::MAX; n];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for (c, members) in forest.clusters() {
        let mut diam = 0;
        for &s in &members {
            for &v in &members {
                dist[v] = u64::MAX;
            }
            dist[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &(w, _) in g.neighbors(u) {
                    if forest.center(w) == Some(c) && dist[w] == u64::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            for &v in &members {
                diam = diam.max(dist[v]);
            }
        }
        out.push(diam);
    }
    out
}

/// One outgoing edge per neighboring cluster: the smallest-id neighbor in that cluster.
pub(super) fn pick_f_edges(g: &Graph, v: NodeId, own: NodeId, heard: &[(NodeId, NodeId)]) -> Vec<(NodeId, EdgeId)> {
    let mut best: Vec<(NodeId, NodeId)> = Vec::new(); // (cluster, neighbor)
    for &(u, c) in heard {
        if c == own {
            continue;
        }
        match best.iter_mut().find(|(bc, _)| *bc == c) {
            Some(entry) => entry.1 = entry.1.min(u),
            None => best.push((c, u)),
        }
    }
    let mut out: Vec<(NodeId, EdgeId)> =
        best.into_iter().map(|(_, u)| (u, g.edge_between(v, u).expect("heard from a neighbor"))).collect();
    out.sort_unstable();
    out
}

fn attempt(g: &Graph, beta: f64, seed: u64) -> Result<LdcDecomposition, LdcError> {
    let n = g.n();
    let program = Mpx { beta };
    let run = run_bcongest(g, &program, &vec![(); n], 8 * shift_cap(n, beta) + 4 * n as u64 + 16, seed)?;
    let parents: Vec<Option<NodeId>> = run.outputs.iter().map(|o| o.1).collect();
    let forest = ClusterForest::from_parents(g, parents, &vec![true; n])?;
    let f_out: Vec<_> = (0..n).map(|v| pick_f_edges(g, v, run.outputs[v].0, &run.outputs[v].2)).collect();
    let max_diameter = strong_diameters(g, &forest).into_iter().max().unwrap_or(0);
    let max_f_degree = f_out.iter().map(Vec::len).max().unwrap_or(0);
    Ok(LdcDecomposition {
        forest,
        f_out,
        r_bound: 0,
        d_bound: 0,
        max_diameter,
        max_f_degree,
        attempts: 1,
        metrics: run.metrics,
    })
}

/// [`ldc_decompose_with`] with default bounds and retries.
pub fn ldc_decompose(g: &Graph, beta: f64, seed: u64) -> Result<LdcDecomposition, LdcError> {
    ldc_decompose_with(g, &LdcParams { beta, ..LdcParams::default() }, seed)
}

/// Builds the decomposition, checking `strong diameter ≤ r_bound` and `F-degree ≤ d_bound`,
/// with both bounds `bound_factor · ⌈log₂ n⌉`. A failed check is retried with the next derived
/// seed. The cost of every attempt is charged.
pub fn ldc_decompose_with(g: &Graph, params: &LdcParams, seed: u64) -> Result<LdcDecomposition, LdcError> {
    if !(params.beta > 0.0 && params.beta < 1.0) {
        return Err(LdcError::InvalidBeta(params.beta));
    }
    let bound = params.bound_factor * log2_ceil(g.n()).max(1) as u64;
    let mut total = SimMetrics::with_edges(g.m());
    let mut last = None;
    for a in 0..params.max_attempts.max(1) {
        let s = if a == 0 { seed } else { RandomStream::new(seed).derive("ldc-retry", a as u64).seed_u64() };
        let mut d = attempt(g, params.beta, s)?;
        total.append_sequential("mpx", &d.metrics);
        let violation = if d.max_diameter > bound {
            Some((LdcBound::Diameter, d.max_diameter))
        } else if d.max_f_degree as u64 > bound {
            Some((LdcBound::FDegree, d.max_f_degree as u64))
        } else {
            None
        };
        match violation {
            None => {
                d.r_bound = bound;
                d.d_bound = bound;
                d.attempts = a + 1;
                d.metrics = total;
                return Ok(d);
            }
            Some(v) => last = Some(v),
        }
    }
    let (b, value) = last.expect("at least one attempt");
    Err(LdcError::Bound { bound: b, value, limit: bound, attempts: params.max_attempts.max(1) })
}

/// A failed structural check of a decomposition.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LdcViolation {
    /// Some node is not clustered.
    #[error("node {0} is not in a cluster")]
    Unclustered(NodeId),
    /// Cluster diameter above `r_bound`.
    #[error("cluster {center} has strong diameter {diameter} > {bound}")]
    Diameter {
        /// Center.
        center: NodeId,
        /// Measured.
        diameter: u64,
        /// Bound.
        bound: u64,
    },
    /// Too many F edges.
    #[error("node {node} has {degree} F edges > {bound}")]
    FDegree {
        /// Node.
        node: NodeId,
        /// F edges.
        degree: usize,
        /// Bound.
        bound: u64,
    },
    /// No F edge into a neighboring cluster.
    #[error("node {node} has no F edge into neighboring cluster {cluster}")]
    Uncovered {
        /// Node.
        node: NodeId,
        /// Cluster center.
        cluster: NodeId,
    },
    /// An F edge that is not an edge, stays inside the cluster, or duplicates a cluster.
    #[error("node {node} has a malformed F edge to {target}")]
    BadFEdge {
        /// Node.
        node: NodeId,
        /// Target.
        target: NodeId,
    },
}

/// Summary of a valid decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LdcStats {
    /// Number of clusters.
    pub clusters: usize,
    /// Largest strong diameter.
    pub max_diameter: u64,
    /// Largest F-degree.
    pub max_f_degree: usize,
    /// Largest number of neighboring clusters of any node.
    pub max_neighbor_clusters: usize,
}

/// Checks partition, diameter, F-degree and coverage from scratch.
pub fn validate_ldc(g: &Graph, d: &LdcDecomposition) -> Result<LdcStats, LdcViolation> {
    let n = g.n();
    for v in 0..n {
        if d.forest.center(v).is_none() {
            return Err(LdcViolation::Unclustered(v));
        }
    }
    let clusters = d.forest.clusters();
    let diams = strong_diameters(g, &d.forest);
    for ((c, _), &diam) in clusters.iter().zip(&diams) {
        if diam > d.r_bound {
            return Err(LdcViolation::Diameter { center: *c, diameter: diam, bound: d.r_bound });
        }
    }
    let mut max_nc = 0;
    for v in 0..n {
        let own = d.center(v);
        let f = &d.f_out[v];
        if f.len() as u64 > d.d_bound {
            return Err(LdcViolation::FDegree { node: v, degree: f.len(), bound: d.d_bound });
        }
        let mut hit: Vec<NodeId> = Vec::new();
        for &(u, e) in f {
            let ok = g.edge_between(v, u) == Some(e) && d.center(u) != own && !hit.contains(&d.center(u));
            if !ok {
                return Err(LdcViolation::BadFEdge { node: v, target: u });
            }
            hit.push(d.center(u));
        }
        let mut nbr_clusters: Vec<NodeId> =
            g.neighbors(v).iter().map(|&(u, _)| d.center(u)).filter(|&c| c != own).collect();
        nbr_clusters.sort_unstable();
        nbr_clusters.dedup();
        max_nc = max_nc.max(nbr_clusters.len());
        for c in nbr_clusters {
            if !hit.contains(&c) {
                return Err(LdcViolation::Uncovered { node: v, cluster: c });
            }
        }
    }
    Ok(LdcStats {
        clusters: clusters.len(),
        max_diameter: diams.into_iter().max().unwrap_or(0),
        max_f_degree: d.f_out.iter().map(Vec::len).max().unwrap_or(0),
        max_neighbor_clusters: max_nc,
    })
}
