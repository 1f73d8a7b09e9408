//! Baswana-Sen cluster hierarchies, pruning and ensembles.
//!
//! Level `i` has a clustering `C_i` of `V_i`, a low-degree set `L_i` and inter-cluster edges
//! `F_i` owned by the nodes of `L_i`. `C_0` is all singletons, `C_κ` is empty, and
//! `L_1, ..., L_κ` partition `V`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::announce::announce;
use super::forest::{ClusterForest, ForestError};
use super::ldc::pick_f_edges;
use super::routing::{tree_echo_cost, tree_flood_cost};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::math::{ceil_usize, ln_at_least_one, pow_ceil, powf};
use crate::random::RandomStream;
use crate::sim::{Message, SimError, SimMetrics};

const TAG_ANNOUNCE: u8 = 40;

/// Construction parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsParams {
    /// Level parameter; `κ = ⌈1/ε⌉`.
    pub epsilon: f64,
    /// Constant `c` of the F-degree bound `c · n^ε · ln n`.
    pub degree_factor: f64,
    /// Attempts before a degree violation becomes an error.
    pub max_attempts: u32,
}

impl Default for BsParams {
    fn default() -> Self {
        BsParams { epsilon: 0.5, degree_factor: 2.0, max_attempts: 4 }
    }
}

impl BsParams {
    /// Parameters at level parameter `epsilon` taken from a constants set.
    pub fn from_constants(epsilon: f64, c: &crate::constants::Constants) -> Self {
        BsParams { epsilon, degree_factor: c.bs_degree_factor, max_attempts: c.max_attempts }
    }
}

/// Construction failures.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BsError {
    /// `ε` outside `(0, 1]`.
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),
    /// Some node kept too many F edges on every attempt.
    #[error("node {node} has {degree} F edges at level {level} (limit {limit}) after {attempts} attempts")]
    DegreeBound {
        /// Level.
        level: usize,
        /// Node.
        node: NodeId,
        /// Its F-degree.
        degree: usize,
        /// Allowed degree.
        limit: usize,
        /// Attempts made.
        attempts: u32,
    },
    /// Engine failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Malformed cluster trees.
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// One level of a hierarchy.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BsLevel {
    /// Clustering `C_i`, rooted at the centers.
    pub clusters: ClusterForest,
    /// `L_i`, ascending.
    pub low: Vec<NodeId>,
    /// `F_i` edges per node as `(neighbor, edge)`, empty outside `L_i`.
    pub f_out: Vec<Vec<(NodeId, EdgeId)>>,
}

/// A Baswana-Sen cluster hierarchy with levels `0..=κ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BsHierarchy {
    /// Level parameter.
    pub epsilon: f64,
    /// Number of levels minus one.
    pub kappa: usize,
    /// Levels `0..=κ`.
    pub levels: Vec<BsLevel>,
    /// Largest `i` with `v ∈ S_i`.
    pub sample_level: Vec<usize>,
    /// The `j` with `v ∈ L_j`.
    pub low_level: Vec<usize>,
    /// Whether clusters were pruned and F rebuilt.
    pub pruned: bool,
    /// Attempts used by the construction.
    pub attempts: u32,
    /// Cost of construction (and pruning, when pruned).
    pub metrics: SimMetrics,
}

/// `κ = ⌈1/ε⌉`.
pub fn kappa_for(epsilon: f64) -> usize {
    ceil_usize(1.0 / epsilon - 1e-9).max(1)
}

/// Pruning threshold `⌈n^{1−ε}⌉`.
pub fn prune_threshold(n: usize, epsilon: f64) -> usize {
    pow_ceil(n, 1.0 - epsilon).max(1)
}

/// F-degree limit `c · n^ε · ln n`, rounded down.
pub fn degree_limit(n: usize, epsilon: f64, factor: f64) -> usize {
    (factor * powf(n, epsilon) * ln_at_least_one(n)) as usize
}

fn check_epsilon(epsilon: f64) -> Result<(), BsError> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(BsError::InvalidEpsilon(epsilon))
    }
}

/// Whether center `c` of `C_{level-1}` is sampled into `S_level`.
fn coin(seed: u64, level: usize, c: NodeId, p: f64) -> bool {
    RandomStream::new(seed).derive("bs-sample", level as u64).derive("node", c as u64).rng().gen_bool(p)
}

/// Broadcast of `[center, flag]` by every member of `forest`; returns per node the heard
/// `(neighbor, center, flag)` triples.
fn announce_clusters(
    g: &Graph,
    forest: &ClusterForest,
    flag: impl Fn(NodeId) -> bool,
) -> Result<(Vec<Vec<(NodeId, NodeId, bool)>>, SimMetrics), SimError> {
    let msgs: Vec<Option<Message>> = (0..g.n())
        .map(|v| forest.center(v).map(|c| Message::new(TAG_ANNOUNCE, &[c as u64, u64::from(flag(c))])))
        .collect();
    let (heard, metrics) = announce(g, &msgs, 0)?;
    let heard = heard
        .into_iter()
        .map(|h| h.into_iter().map(|(u, m)| (u, m.field(0) as NodeId, m.field(1) == 1)).collect())
        .collect();
    Ok((heard, metrics))
}

fn attempt(g: &Graph, epsilon: f64, seed: u64) -> Result<BsHierarchy, BsError> {
    let n = g.n();
    let kappa = kappa_for(epsilon);
    let p = powf(n, -epsilon).min(1.0);
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut levels =
        vec![BsLevel { clusters: ClusterForest::singletons(n), low: Vec::new(), f_out: vec![Vec::new(); n] }];
    let mut sample_level = vec![0usize; n];
    let mut low_level = vec![0usize; n];
    for i in 0..kappa {
        let current = &levels[i].clusters;
        let top = i + 1 == kappa;
        let mut sampled = vec![false; n];
        if !top {
            for c in (0..n).filter(|&c| current.is_center(c)) {
                if coin(seed, i + 1, c, p) {
                    sampled[c] = true;
                    sample_level[c] = i + 1;
                }
            }
            metrics.append_sequential("bs-sample", &tree_flood_cost(g, current, 1));
        }
        let (heard, cost) = announce_clusters(g, current, |c| sampled[c])?;
        metrics.append_sequential("bs-announce", &cost);

        let mut parent = vec![None; n];
        let mut member = vec![false; n];
        let mut low = Vec::new();
        let mut f_out = vec![Vec::new(); n];
        let mut joins = SimMetrics::with_edges(g.m());
        for v in (0..n).filter(|&v| current.contains(v)) {
            let own = current.center(v).expect("member");
            if sampled[own] {
                member[v] = true;
                parent[v] = current.parent(v);
                continue;
            }
            // Smallest sampled center, then smallest neighbor inside it.
            let join = heard[v].iter().filter(|h| h.2).map(|&(u, c, _)| (c, u)).min();
            match join {
                Some((_, u)) if !top => {
                    member[v] = true;
                    parent[v] = Some(u);
                    joins.charge_edge(g.edge_between(v, u).expect("heard from a neighbor"), 1);
                    joins.rounds = 1;
                }
                _ => {
                    low.push(v);
                    low_level[v] = i + 1;
                    let pairs: Vec<(NodeId, NodeId)> = heard[v].iter().map(|&(u, c, _)| (u, c)).collect();
                    f_out[v] = pick_f_edges(g, v, own, &pairs);
                }
            }
        }
        metrics.append_sequential("bs-join", &joins);
        let clusters = if top { ClusterForest::empty(n) } else { ClusterForest::from_parents(g, parent, &member)? };
        levels.push(BsLevel { clusters, low, f_out });
    }
    Ok(BsHierarchy { epsilon, kappa, levels, sample_level, low_level, pruned: false, attempts: 1, metrics })
}

/// [`build_bs_hierarchy_with`] with default constants.
pub fn build_bs_hierarchy(g: &Graph, epsilon: f64, seed: u64) -> Result<BsHierarchy, BsError> {
    build_bs_hierarchy_with(g, &BsParams { epsilon, ..BsParams::default() }, seed)
}

/// Builds an unpruned hierarchy and checks the F-degree bound, retrying with derived seeds.
/// The cost of every attempt is charged.
pub fn build_bs_hierarchy_with(g: &Graph, params: &BsParams, seed: u64) -> Result<BsHierarchy, BsError> {
    check_epsilon(params.epsilon)?;
    let attempts = params.max_attempts.max(1);
    let mut total = SimMetrics::with_edges(g.m());
    let mut last = None;
    for a in 0..attempts {
        let s = if a == 0 { seed } else { RandomStream::new(seed).derive("bs-retry", a as u64).seed_u64() };
        let mut h = attempt(g, params.epsilon, s)?;
        total.append_sequential("bs-attempt", &h.metrics);
        let report = h.degree_report(params.degree_factor);
        if report.max_degree <= report.limit {
            h.attempts = a + 1;
            h.metrics = total;
            return Ok(h);
        }
        last = Some(report);
    }
    let r = last.expect("at least one attempt");
    let (level, node) = r.worst.expect("violation has a witness");
    Err(BsError::DegreeBound { level, node, degree: r.max_degree, limit: r.limit, attempts })
}

/// Largest F-degree over all levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeReport {
    /// Largest `|F_i(v)|`.
    pub max_degree: usize,
    /// The bound it is compared with.
    pub limit: usize,
    /// `(level, node)` attaining the maximum.
    pub worst: Option<(usize, NodeId)>,
}

/// Per-level cluster data, for JSON dumps.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelDump {
    /// Level index.
    pub level: usize,
    /// `(center, members)`.
    pub clusters: Vec<(NodeId, Vec<NodeId>)>,
    /// `(node, parent)` for every non-center member.
    pub parents: Vec<(NodeId, NodeId)>,
    /// `L_i`.
    pub low: Vec<NodeId>,
    /// `F_i` as `(owner, neighbor)`.
    pub f_edges: Vec<(NodeId, NodeId)>,
}

/// A hierarchy in plain lists.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HierarchyDump {
    /// Level parameter.
    pub epsilon: f64,
    /// `κ`.
    pub kappa: usize,
    /// Pruned flag.
    pub pruned: bool,
    /// Levels `0..=κ`.
    pub levels: Vec<LevelDump>,
}

impl BsHierarchy {
    /// Node count.
    pub fn n(&self) -> usize {
        self.low_level.len()
    }

    /// Clustering `C_i`.
    pub fn clustering(&self, i: usize) -> &ClusterForest {
        &self.levels[i].clusters
    }

    /// All F edges, deduplicated and ascending.
    pub fn f_edges(&self) -> Vec<EdgeId> {
        let mut es: Vec<EdgeId> = self.levels.iter().flat_map(|l| l.f_out.iter().flatten().map(|&(_, e)| e)).collect();
        es.sort_unstable();
        es.dedup();
        es
    }

    /// Mask over edges: tree edges of `C_1, ..., C_{κ−1}`.
    pub fn cluster_edge_mask(&self, g: &Graph) -> Vec<bool> {
        let mut mask = vec![false; g.m()];
        for l in &self.levels[1..self.kappa] {
            for e in l.clusters.tree_edges(g) {
                mask[e] = true;
            }
        }
        mask
    }

    /// Largest F-degree, compared with `factor · n^ε · ln n`.
    pub fn degree_report(&self, factor: f64) -> DegreeReport {
        let mut report =
            DegreeReport { max_degree: 0, limit: degree_limit(self.n(), self.epsilon, factor), worst: None };
        for (i, l) in self.levels.iter().enumerate() {
            for &v in &l.low {
                let d = l.f_out[v].len();
                if report.worst.is_none() || d > report.max_degree {
                    report.max_degree = d;
                    report.worst = Some((i, v));
                }
            }
        }
        report
    }

    /// Pruned copy: large proper subtrees of `C_1, ..., C_{κ−1}` become clusters of their own and
    /// every `F_i` is rebuilt against the pruned `C_{i−1}`.
    pub fn prune(&self, g: &Graph) -> Result<BsHierarchy, BsError> {
        let n = self.n();
        let threshold = prune_threshold(n, self.epsilon);
        let mut out = self.clone();
        out.pruned = true;
        for i in 1..self.kappa {
            let forest = &mut out.levels[i].clusters;
            out.metrics.append_sequential("prune-sizes", &tree_echo_cost(g, forest));
            for v in split_points(forest, threshold) {
                forest.detach(v);
            }
        }
        for i in 1..=self.kappa {
            if i >= 2 {
                let (heard, cost) = announce_clusters(g, &out.levels[i - 1].clusters, |_| false)?;
                out.metrics.append_sequential("prune-announce", &cost);
                let below = &out.levels[i - 1].clusters;
                let mut f_out = vec![Vec::new(); n];
                for &v in &out.levels[i].low {
                    let own = below.center(v).expect("L_i lies in V_{i-1}");
                    let pairs: Vec<(NodeId, NodeId)> = heard[v].iter().map(|&(u, c, _)| (u, c)).collect();
                    f_out[v] = pick_f_edges(g, v, own, &pairs);
                }
                out.levels[i].f_out = f_out;
            }
        }
        Ok(out)
    }

    /// Plain-list form.
    pub fn dump(&self) -> HierarchyDump {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelDump {
                level: i,
                clusters: l.clusters.clusters(),
                parents: (0..self.n()).filter_map(|v| l.clusters.parent(v).map(|p| (v, p))).collect(),
                low: l.low.clone(),
                f_edges: l.low.iter().flat_map(|&v| l.f_out[v].iter().map(move |&(u, _)| (v, u))).collect(),
            })
            .collect();
        HierarchyDump { epsilon: self.epsilon, kappa: self.kappa, pruned: self.pruned, levels }
    }
}

/// Non-root nodes to split off: deepest first (ties by smaller id), a node is split when the
/// part of its subtree not already split off has at least `threshold` nodes.
fn split_points(forest: &ClusterForest, threshold: usize) -> Vec<NodeId> {
    let n = forest.n();
    let mut order: Vec<NodeId> = (0..n).filter(|&v| forest.contains(v)).collect();
    order.sort_by_key(|&v| (core::cmp::Reverse(forest.depth(v)), v));
    let mut rest: Vec<usize> = (0..n).map(|v| usize::from(forest.contains(v))).collect();
    let mut out = Vec::new();
    for v in order {
        let Some(p) = forest.parent(v) else { continue };
        if rest[v] >= threshold {
            out.push(v);
        } else {
            rest[p] += rest[v];
        }
    }
    out
}

/// Prunes `h`; see [`BsHierarchy::prune`].
pub fn prune_hierarchy(g: &Graph, h: &BsHierarchy) -> Result<BsHierarchy, BsError> {
    h.prune(g)
}

/// `ζ = ⌈n^ε⌉` independently seeded pruned hierarchies.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyEnsemble {
    /// `ζ`.
    pub zeta: usize,
    /// The hierarchies.
    pub hierarchies: Vec<BsHierarchy>,
    /// Cost of building all of them one after the other.
    pub metrics: SimMetrics,
}

impl HierarchyEnsemble {
    /// Hierarchy assigned to component `k` (round-robin).
    pub fn hierarchy_of(&self, k: usize) -> usize {
        k % self.zeta
    }

    /// Components of `0..ell` assigned to hierarchy `j`.
    pub fn batch(&self, j: usize, ell: usize) -> Vec<usize> {
        (j..ell).step_by(self.zeta).collect()
    }
}

/// Builds the ensemble with default constants.
pub fn build_ensemble(g: &Graph, epsilon: f64, seed: u64) -> Result<HierarchyEnsemble, BsError> {
    build_ensemble_with(g, &BsParams { epsilon, ..BsParams::default() }, seed)
}

/// Builds `⌈n^ε⌉` pruned hierarchies from the streams `derive("ensemble", j)`.
pub fn build_ensemble_with(g: &Graph, params: &BsParams, seed: u64) -> Result<HierarchyEnsemble, BsError> {
    check_epsilon(params.epsilon)?;
    let zeta = pow_ceil(g.n(), params.epsilon).max(1);
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut hierarchies = Vec::with_capacity(zeta);
    for j in 0..zeta {
        let s = RandomStream::new(seed).derive("ensemble", j as u64).seed_u64();
        let h = build_bs_hierarchy_with(g, params, s)?.prune(g)?;
        metrics.append_sequential("ensemble-member", &h.metrics);
        hierarchies.push(h);
    }
    Ok(HierarchyEnsemble { zeta, hierarchies, metrics })
}

/// A failed structural check.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BsViolation {
    /// The members of `C_i` are not `V_i`, or `L_1..L_κ` do not partition `V`.
    #[error("level {level}: node {node} is misplaced")]
    Partition {
        /// Level.
        level: usize,
        /// Node.
        node: NodeId,
    },
    /// A cluster of `C_i` has strong radius above `i`.
    #[error("level {level}: cluster {center} has radius {radius}")]
    Radius {
        /// Level.
        level: usize,
        /// Center.
        center: NodeId,
        /// Radius from the center inside the cluster (`u64::MAX` if disconnected).
        radius: u64,
    },
    /// An F edge that does not lead to a distinct foreign cluster.
    #[error("level {level}: F edge ({node}, {neighbor}) is invalid")]
    FEdge {
        /// Level.
        level: usize,
        /// Owner.
        node: NodeId,
        /// Other end.
        neighbor: NodeId,
    },
    /// An edge covered neither by a shared cluster nor by an F edge.
    #[error("edge ({u}, {v}) is not covered at level {level}")]
    Uncovered {
        /// Lower-level endpoint.
        u: NodeId,
        /// Other endpoint.
        v: NodeId,
        /// Level of `u`.
        level: usize,
    },
    /// A proper subtree with too many nodes after pruning.
    #[error("level {level}: subtree at {node} has {size} nodes (threshold {threshold})")]
    Subtree {
        /// Level.
        level: usize,
        /// Subtree root.
        node: NodeId,
        /// Its size.
        size: usize,
        /// Threshold.
        threshold: usize,
    },
}

/// Membership, strong radius `≤ i` for every cluster of `C_i` (BFS inside the cluster from the
/// center), and validity of every F edge.
pub fn validate_radius(g: &Graph, h: &BsHierarchy) -> Result<(), BsViolation> {
    let n = g.n();
    for v in 0..n {
        if h.low_level[v] == 0 || h.low_level[v] > h.kappa {
            return Err(BsViolation::Partition { level: h.low_level[v], node: v });
        }
    }
    let mut dist = vec![u64::MAX; n];
    let mut queue = alloc::collections::VecDeque::new();
    for (i, l) in h.levels.iter().enumerate() {
        for v in 0..n {
            let in_vi = h.low_level[v] > i;
            if l.clusters.contains(v) != in_vi || (i > 0 && l.low.contains(&v) != (h.low_level[v] == i)) {
                return Err(BsViolation::Partition { level: i, node: v });
            }
        }
        for (c, members) in l.clusters.clusters() {
            for &v in &members {
                dist[v] = u64::MAX;
            }
            dist[c] = 0;
            queue.push_back(c);
            while let Some(u) = queue.pop_front() {
                for &(w, _) in g.neighbors(u) {
                    if l.clusters.center(w) == Some(c) && dist[w] == u64::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            let radius = members.iter().map(|&v| dist[v]).max().unwrap_or(0);
            if radius > i as u64 {
                return Err(BsViolation::Radius { level: i, center: c, radius });
            }
        }
        if i == 0 {
            continue;
        }
        let below = &h.levels[i - 1].clusters;
        for &v in &l.low {
            let mut seen: Vec<NodeId> = Vec::new();
            for &(u, e) in &l.f_out[v] {
                let bad = g.edge_between(v, u) != Some(e)
                    || below.center(u).is_none()
                    || below.center(u) == below.center(v)
                    || seen.contains(&below.center(u).expect("checked"));
                if bad {
                    return Err(BsViolation::FEdge { level: i, node: v, neighbor: u });
                }
                seen.push(below.center(u).expect("checked"));
            }
        }
    }
    Ok(())
}

/// For each given edge `(u, v)` with `u ∈ L_i`, `v ∈ L_j`, `i ≤ j` (both orientations when
/// `i = j`): `u` and `v` share a cluster of `C_{i−1}`, or some F edge `(u, w) ∈ F_i` has `w` in
/// the cluster of `v`.
pub fn validate_cluster_edge_cases<I: IntoIterator<Item = EdgeId>>(
    g: &Graph,
    h: &BsHierarchy,
    edges: I,
) -> Result<(), BsViolation> {
    let covered = |u: NodeId, v: NodeId| {
        let i = h.low_level[u];
        let below = &h.levels[i - 1].clusters;
        let cv = below.center(v);
        cv.is_some() && (below.center(u) == cv || h.levels[i].f_out[u].iter().any(|&(w, _)| below.center(w) == cv))
    };
    for e in edges {
        let edge = g.edge(e);
        let (a, b) = (edge.u, edge.v);
        let (la, lb) = (h.low_level[a], h.low_level[b]);
        let orientations: &[(NodeId, NodeId)] = if la < lb {
            &[(a, b)]
        } else if lb < la {
            &[(b, a)]
        } else {
            &[(a, b), (b, a)]
        };
        for &(u, v) in orientations {
            if !covered(u, v) {
                return Err(BsViolation::Uncovered { u, v, level: h.low_level[u] });
            }
        }
    }
    Ok(())
}

/// Every proper subtree of every cluster in `C_1, ..., C_{κ−1}` has fewer than `⌈n^{1−ε}⌉` nodes.
pub fn validate_pruned(h: &BsHierarchy) -> Result<(), BsViolation> {
    let threshold = prune_threshold(h.n(), h.epsilon);
    for i in 1..h.kappa {
        let f = &h.levels[i].clusters;
        let sizes = f.subtree_sizes();
        for v in 0..h.n() {
            if f.contains(v) && !f.is_center(v) && sizes[v] >= threshold {
                return Err(BsViolation::Subtree { level: i, node: v, size: sizes[v], threshold });
            }
        }
    }
    Ok(())
}
