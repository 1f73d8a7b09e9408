//! Sparse neighborhood covers.
//!
//! Phase `j = 1..k` samples every still uncovered node with probability `n^{j/k − 1}` (all of
//! them in phase `k`); the sampled nodes explore to radius `R_j = (2^{k−j+1} − 1) · W` and a
//! node is covered once it lies within `R_j − W` of some phase-`j` center. The radii halve
//! (minus `W`) from phase to phase so that a sampled node in phase `j − 1` would have covered
//! every node within `R_j` of any node whose `R_j`-ball is still crowded in phase `j`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bcsim::{simulate, BcError, BcParams};
use crate::constants::Constants;
use crate::graph::{Graph, NodeId};
use crate::math::{ln_at_least_one, powf};
use crate::random::RandomStream;
use crate::sim::{Message, Mode, NodeCtx, NodeProgram, Outbox, SimMetrics};

/// Tag of exploration messages `[center, distance]`.
pub const TAG_EXPLORE: u8 = 70;

/// Reseeds allowed after a failed validation.
pub const MAX_RESEEDS: u32 = 3;

/// Explorations from every center up to `radius` hops (BCONGEST). Pending `(distance, center)`
/// pairs are broadcast one per round, smallest first, so every node ends with its exact
/// distance to each center within the radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exploration {
    /// Largest depth explored.
    pub radius: u64,
}

/// State of [`Exploration`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExplorationState {
    known: BTreeMap<NodeId, (u64, NodeId)>,
    pending: BTreeSet<(u64, NodeId)>,
}

/// Per center reached: `(center, distance, parent)`; a center is its own parent.
pub type ExplorationOutput = Vec<(NodeId, u64, NodeId)>;

impl NodeProgram for Exploration {
    type Input = bool;
    type State = ExplorationState;
    type Output = ExplorationOutput;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, center: &bool, _: &RandomStream) -> ExplorationState {
        let mut s = ExplorationState::default();
        if *center {
            s.known.insert(ctx.id(), (0, ctx.id()));
            if self.radius > 0 {
                s.pending.insert((0, ctx.id()));
            }
        }
        s
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &ExplorationState, _: u64) -> Outbox {
        match s.pending.first() {
            Some(&(d, c)) => Outbox::Broadcast(Message::new(TAG_EXPLORE, &[c as u64, d])),
            None => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        _: &NodeCtx<'_>,
        s: &mut ExplorationState,
        _: u64,
        inbox: &[(NodeId, Message)],
        _: &RandomStream,
    ) {
        s.pending.pop_first();
        for &(u, m) in inbox {
            if m.tag() != TAG_EXPLORE {
                continue;
            }
            let (c, d) = (m.field(0) as NodeId, m.field(1) + 1);
            if d > self.radius {
                continue;
            }
            match s.known.get(&c).copied() {
                Some((old, _)) if old < d => {}
                Some((old, p)) if old == d => {
                    if u < p {
                        s.known.insert(c, (d, u));
                    }
                }
                old => {
                    if let Some((od, _)) = old {
                        s.pending.remove(&(od, c));
                    }
                    s.known.insert(c, (d, u));
                    if d < self.radius {
                        s.pending.insert((d, c));
                    }
                }
            }
        }
    }

    fn halted(&self, s: &ExplorationState) -> bool {
        s.pending.is_empty()
    }

    fn output(&self, s: &ExplorationState) -> ExplorationOutput {
        s.known.iter().map(|(&c, &(d, p))| (c, d, p)).collect()
    }

    fn output_words(&self, o: &ExplorationOutput) -> usize {
        3 * o.len()
    }
}

/// One tree of a cover.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverTree {
    /// Root.
    pub center: NodeId,
    /// Phase that grew it (1-based).
    pub phase: usize,
    /// Exploration radius of that phase.
    pub radius: u64,
    /// `(node, depth, parent)`, ascending by node; the center is its own parent.
    pub members: Vec<(NodeId, u64, NodeId)>,
}

impl CoverTree {
    /// Largest member depth.
    pub fn depth(&self) -> u64 {
        self.members.iter().map(|m| m.1).max().unwrap_or(0)
    }

    /// Whether `v` is a member.
    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search_by_key(&v, |m| m.0).is_ok()
    }
}

/// Cover failures.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CoverError {
    /// `k` or `W` is zero.
    #[error("k and W must be positive")]
    Params,
    /// The graph has more than one component.
    #[error("graph has {0} components")]
    Disconnected(usize),
    /// Every attempt failed validation.
    #[error("cover failed validation on all {attempts} attempts: {last}")]
    Validation {
        /// Attempts made.
        attempts: u32,
        /// Violation of the last attempt.
        last: CoverViolation,
    },
    /// Cluster simulation failure.
    #[error(transparent)]
    Bc(#[from] BcError),
}

/// A broken cover property.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CoverViolation {
    /// A member's parent is not a neighbor one level up in the same tree.
    #[error("tree of {center}: bad parent for {node}")]
    Tree {
        /// Tree root.
        center: NodeId,
        /// Member.
        node: NodeId,
    },
    /// A tree is too deep.
    #[error("tree of {center} has depth {depth}, bound {bound}")]
    Depth {
        /// Tree root.
        center: NodeId,
        /// Depth.
        depth: u64,
        /// `c · W · k`.
        bound: u64,
    },
    /// A node is in too many trees.
    #[error("node {node} is in {count} trees, bound {bound:.1}")]
    Membership {
        /// Node.
        node: NodeId,
        /// Trees containing it.
        count: usize,
        /// `c · k · n^{1/k} · ln n`.
        bound: f64,
    },
    /// No tree holds a node's whole `W`-neighborhood.
    #[error("no tree contains the {w}-neighborhood of {node}")]
    Neighborhood {
        /// Node.
        node: NodeId,
        /// Radius.
        w: u64,
    },
}

/// Measured quantities of a valid cover.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverStats {
    /// Trees.
    pub trees: usize,
    /// Largest tree depth.
    pub max_depth: u64,
    /// `c · W · k`.
    pub depth_bound: u64,
    /// Largest number of trees containing one node.
    pub max_membership: usize,
    /// `c · k · n^{1/k} · ln n`.
    pub membership_bound: f64,
}

/// Checks the tree structure and the three cover properties with the constants
/// `cover_depth` and `cover_membership`.
pub fn validate_cover(
    g: &Graph,
    trees: &[CoverTree],
    k: usize,
    w: u64,
    constants: &Constants,
) -> Result<CoverStats, CoverViolation> {
    let n = g.n();
    let depth_bound = (constants.cover_depth * (w * k as u64) as f64) as u64;
    let membership_bound = constants.cover_membership * k as f64 * powf(n, 1.0 / k as f64) * ln_at_least_one(n);
    let mut count = vec![0usize; n];
    let mut max_depth = 0;
    for t in trees {
        let depth_of: BTreeMap<NodeId, u64> = t.members.iter().map(|m| (m.0, m.1)).collect();
        for &(v, d, p) in &t.members {
            let ok = if v == t.center {
                d == 0 && p == v
            } else {
                g.edge_between(v, p).is_some() && depth_of.get(&p) == Some(&(d.wrapping_sub(1)))
            };
            if !ok {
                return Err(CoverViolation::Tree { center: t.center, node: v });
            }
            count[v] += 1;
        }
        let depth = t.depth();
        if depth > depth_bound {
            return Err(CoverViolation::Depth { center: t.center, depth, bound: depth_bound });
        }
        max_depth = max_depth.max(depth);
    }
    for (v, &c) in count.iter().enumerate() {
        if c as f64 > membership_bound {
            return Err(CoverViolation::Membership { node: v, count: c, bound: membership_bound });
        }
        let ball: Vec<NodeId> =
            g.bfs_hops(v).iter().enumerate().filter(|(_, h)| h.is_some_and(|h| h <= w)).map(|(u, _)| u).collect();
        if !trees.iter().any(|t| t.contains(v) && ball.iter().all(|&u| t.contains(u))) {
            return Err(CoverViolation::Neighborhood { node: v, w });
        }
    }
    Ok(CoverStats {
        trees: trees.len(),
        max_depth,
        depth_bound,
        max_membership: count.iter().copied().max().unwrap_or(0),
        membership_bound,
    })
}

/// A validated cover and its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverRun {
    /// Trees in phase order, then by center.
    pub trees: Vec<CoverTree>,
    /// Validation figures.
    pub stats: CoverStats,
    /// Cost of every attempt.
    pub metrics: SimMetrics,
    /// Broadcasts of the explorations.
    pub broadcasts: u64,
    /// Attempts made.
    pub attempts: u32,
}

/// Radius of phase `j` of `k`: `(2^{k−j+1} − 1) · W`.
pub fn phase_radius(k: usize, j: usize, w: u64) -> u64 {
    ((1u64 << (k - j + 1)) - 1) * w
}

fn build(
    g: &Graph,
    k: usize,
    w: u64,
    seed: u64,
    params: &BcParams,
) -> Result<(Vec<CoverTree>, SimMetrics, u64), BcError> {
    let n = g.n();
    let root = RandomStream::new(seed);
    let mut covered = vec![false; n];
    let mut trees = Vec::new();
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut broadcasts = 0;
    for j in 1..=k {
        let p = if j == k { 1.0 } else { powf(n, j as f64 / k as f64 - 1.0) };
        let stream = root.derive("cover-sample", j as u64);
        let centers: Vec<bool> = (0..n)
            .map(|v| !covered[v] && (p >= 1.0 || stream.derive("node", v as u64).rng().gen::<f64>() < p))
            .collect();
        if !centers.contains(&true) {
            continue;
        }
        let radius = phase_radius(k, j, w);
        let program = Exploration { radius };
        let t_a = 2 * (n as u64 + radius);
        let sim = simulate(g, &program, &centers, t_a, root.derive("cover-run", j as u64).seed_u64(), params)?;
        metrics.append_sequential("exploration", &sim.metrics);
        broadcasts += sim.broadcasts;
        let mut members: BTreeMap<NodeId, Vec<(NodeId, u64, NodeId)>> = BTreeMap::new();
        for (v, out) in sim.outputs.iter().enumerate() {
            for &(c, d, parent) in out {
                members.entry(c).or_default().push((v, d, parent));
                if d + w <= radius {
                    covered[v] = true;
                }
            }
        }
        trees.extend(members.into_iter().map(|(center, members)| CoverTree { center, phase: j, radius, members }));
    }
    metrics.broadcasts = broadcasts;
    Ok((trees, metrics, broadcasts))
}

/// A `(k, W)`-sparse neighborhood cover, validated with [`validate_cover`]; a failing cover is
/// rebuilt from a derived seed at most [`MAX_RESEEDS`] times.
pub fn neighborhood_cover(
    g: &Graph,
    k: usize,
    w: u64,
    seed: u64,
    constants: &Constants,
) -> Result<CoverRun, CoverError> {
    if k == 0 || w == 0 {
        return Err(CoverError::Params);
    }
    match g.component_count() {
        1 => {}
        c => return Err(CoverError::Disconnected(c)),
    }
    let params = BcParams::from_constants(constants);
    let mut total = SimMetrics::with_edges(g.m());
    let mut broadcasts = 0;
    let mut last = None;
    for a in 0..=MAX_RESEEDS {
        let s = if a == 0 { seed } else { RandomStream::new(seed).derive("reseed", a as u64).seed_u64() };
        let (trees, metrics, b) = build(g, k, w, s, &params)?;
        total.append_sequential("attempt", &metrics);
        broadcasts += b;
        total.broadcasts = broadcasts;
        match validate_cover(g, &trees, k, w, constants) {
            Ok(stats) => return Ok(CoverRun { trees, stats, metrics: total, broadcasts, attempts: a + 1 }),
            Err(v) => last = Some(v),
        }
    }
    Err(CoverError::Validation { attempts: MAX_RESEEDS + 1, last: last.expect("at least one attempt") })
}
