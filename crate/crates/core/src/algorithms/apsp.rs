//! All-pairs shortest paths: weighted (Bellman-Ford under the cluster simulation) and the
//! unweighted round/message trade-off (multi-BFS over hierarchies plus landmarks).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::oracles::DistanceMatrix;
use super::programs::{BellmanFord, Bfs};
use crate::aggsim::{
    combine_with_smoothing, prepare_global, schedule_bfs_on, simulate_star, AggError, AggParams, Component,
    CongestionAudit, MultiBfs, MultiBfsOutput, ScheduleReport, Simulator,
};
use crate::bcsim::{simulate, BcError, BcParams};
use crate::cluster::global::{setup_global, GlobalError, GlobalTree};
use crate::cluster::routing::{tree_echo_cost, tree_flood_cost};
use crate::cluster::{build_bs_hierarchy_with, upcast, BsError, BsParams, CastError, ClusterForest, ForestError};
use crate::constants::Constants;
use crate::graph::{Graph, NodeId};
use crate::math::{ceil_usize, ln_at_least_one, log2_at_least_one, log2_ceil, pow_ceil, powf};
use crate::random::RandomStream;
use crate::sim::{run_bcongest, SimError, SimMetrics};

/// Reseeds allowed after a failed certificate check.
pub const MAX_RESEEDS: u32 = 3;

/// APSP failures.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ApspError {
    /// The graph has more than one component.
    #[error("graph has {0} components")]
    Disconnected(usize),
    /// An unweighted solver was given a weighted graph.
    #[error("expected an unweighted graph")]
    Weighted,
    /// `ε` outside the range of the solver.
    #[error("epsilon {0} out of range")]
    Epsilon(f64),
    /// Every attempt produced distances that fail the local certificate.
    #[error("distances failed the certificate on all {attempts} attempts (last witness: source {src}, node {node})")]
    Validation {
        /// Attempts made.
        attempts: u32,
        /// Source of the bad entry.
        src: NodeId,
        /// Node of the bad entry.
        node: NodeId,
    },
    /// Cluster simulation failure.
    #[error(transparent)]
    Bc(#[from] BcError),
    /// Hierarchy simulation failure.
    #[error(transparent)]
    Agg(#[from] AggError),
    /// Hierarchy construction failure.
    #[error(transparent)]
    Bs(#[from] BsError),
    /// Leader election failure.
    #[error(transparent)]
    Global(#[from] GlobalError),
    /// Engine failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Upcast failure.
    #[error(transparent)]
    Cast(#[from] CastError),
    /// Malformed BFS tree.
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Which algorithm produced an unweighted APSP result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    /// Bellman-Ford under the cluster simulation (`ε ≤ 1/⌈log₂ n⌉`).
    Weighted,
    /// Depth-limited multi-BFS with smoothing, then landmarks (`ε < 1/2`).
    Limited,
    /// Full multi-BFS under the star simulation (`ε ≥ 1/2`).
    Full,
}

/// Distances and their cost.
#[derive(Clone, Debug, PartialEq)]
pub struct ApspRun {
    /// Row `v` is the output of node `v`.
    pub distances: DistanceMatrix,
    /// Cost of every attempt, failed ones included.
    pub metrics: SimMetrics,
    /// Broadcasts of the simulated programs.
    pub broadcasts: u64,
    /// Algorithm used.
    pub regime: Regime,
    /// Attempts made (1 when the first run passed).
    pub attempts: u32,
    /// Round bound handed to the simulation (weighted regime), 0 otherwise.
    pub t_a: u64,
}

fn connected(g: &Graph) -> Result<(), ApspError> {
    match g.component_count() {
        1 => Ok(()),
        c => Err(ApspError::Disconnected(c)),
    }
}

/// Round bound for [`BellmanFord`]: `c · (n + ⌈2 · d_T / w_min⌉)`, `d_T` the largest weighted
/// depth of the leader's BFS tree (so `2 · d_T` bounds every distance).
pub fn bellman_ford_round_bound(g: &Graph, tree: &ClusterForest, factor: f64) -> u64 {
    let n = g.n();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_unstable_by_key(|&v| tree.depth(v));
    let mut wdepth = vec![0u64; n];
    for &v in &order {
        if let Some(p) = tree.parent(v) {
            let e = g.edge_between(v, p).expect("tree edge");
            wdepth[v] = wdepth[p] + g.weight(e);
        }
    }
    let w_min = g.edges().iter().map(|e| e.w.unwrap_or(1)).min().unwrap_or(1).max(1);
    let reach = (2 * wdepth.iter().copied().max().unwrap_or(0)).div_ceil(w_min);
    ceil_usize(factor * (n as u64 + reach) as f64).max(1) as u64
}

/// Exact weighted APSP: the leader computes the round bound over its BFS tree, then pipelined
/// Bellman-Ford runs under [`crate::bcsim::simulate`].
pub fn apsp_weighted_msgopt(g: &Graph, seed: u64, constants: &Constants) -> Result<ApspRun, ApspError> {
    connected(g)?;
    let n = g.n();
    let root = RandomStream::new(seed);
    let global = setup_global(g, root.derive("apsp-leader", 0).seed_u64())?;
    let t_a = bellman_ford_round_bound(g, &global.tree, constants.apsp_round_factor);
    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("leader", &global.metrics);
    metrics.append_sequential("round-bound", &tree_echo_cost(g, &global.tree));

    let sim = simulate(
        g,
        &BellmanFord,
        &vec![(); n],
        t_a,
        root.derive("apsp-bf", 0).seed_u64(),
        &BcParams::from_constants(constants),
    )?;
    metrics.append_sequential("bellman-ford", &sim.metrics);
    metrics.in_bits = sim.metrics.in_bits;
    metrics.out_bits = sim.metrics.out_bits;
    metrics.broadcasts = sim.broadcasts;
    let rows: Vec<Vec<Option<u64>>> =
        sim.outputs.iter().map(|est| est.iter().map(|&d| (d != u64::MAX).then_some(d)).collect()).collect();
    Ok(ApspRun {
        distances: DistanceMatrix::from_rows(&rows),
        metrics,
        broadcasts: sim.broadcasts,
        regime: Regime::Weighted,
        attempts: 1,
        t_a,
    })
}

/// Checks that every row of `d` is the hop distance vector of its node: `d(s, s) = 0`, and
/// for `v ≠ s` some neighbor is one closer and none is more than one closer. Returns the first
/// bad `(source, node)`.
pub fn bfs_certificate(g: &Graph, d: &DistanceMatrix) -> Result<(), (NodeId, NodeId)> {
    let n = g.n();
    for s in 0..n {
        for v in 0..n {
            let ok = match d.get(v, s) {
                None => false,
                Some(dv) if v == s => dv == 0,
                Some(0) => false,
                Some(dv) => {
                    let mut closer = false;
                    let mut fine = true;
                    for &(u, _) in g.neighbors(v) {
                        match d.get(u, s) {
                            Some(du) if du + 1 == dv => closer = true,
                            Some(du) if du + 1 < dv => fine = false,
                            _ => {}
                        }
                    }
                    closer && fine
                }
            };
            if !ok || d.get(v, s) != d.get(s, v) {
                return Err((s, v));
            }
        }
    }
    Ok(())
}

/// Per node, per source: `(depth, parent)` in that source's tree, if reached.
pub type TreeTable = Vec<Vec<Option<(u64, NodeId)>>>;

/// Distances after landmarks, the landmark trees as `(child, parent)` lists, and the cost.
pub type LandmarkResolution = (DistanceMatrix, Vec<Vec<(NodeId, NodeId)>>, SimMetrics);

/// `n` BFS trees, one per source, as known at the nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiBfsRun {
    /// `trees[v][s]`: `(depth, parent)` of `v` in the tree of source `s` (sources are their own
    /// parent), `None` if `v` is not reached.
    pub trees: TreeTable,
    /// Depth limit, if any.
    pub depth_limit: Option<u64>,
    /// Cost.
    pub metrics: SimMetrics,
    /// Broadcasts of the simulated programs.
    pub broadcasts: u64,
    /// Broadcasts that missed their global round (0 for a good schedule).
    pub late: u64,
    /// Central schedule of the batches (limited variant only).
    pub schedule: Option<ScheduleReport>,
    /// Congestion split of the batches (limited variant only).
    pub audit: Option<CongestionAudit>,
}

impl MultiBfsRun {
    /// `d(v, s)` from the tree depths; `None` where a depth limit cut the tree.
    pub fn distances(&self) -> DistanceMatrix {
        let rows: Vec<Vec<Option<u64>>> =
            self.trees.iter().map(|row| row.iter().map(|t| t.map(|(d, _)| d)).collect()).collect();
        DistanceMatrix::from_rows(&rows)
    }
}

/// BFS from every node, `ε ∈ [1/2, 1]`: the random-delay schedule over all `n` sources, run
/// under [`simulate_star`] on one pruned hierarchy.
pub fn multi_bfs_full(g: &Graph, epsilon: f64, seed: u64, constants: &Constants) -> Result<MultiBfsRun, ApspError> {
    if !(0.5..=1.0).contains(&epsilon) {
        return Err(ApspError::Epsilon(epsilon));
    }
    connected(g)?;
    let n = g.n();
    let root = RandomStream::new(seed);
    let h = build_bs_hierarchy_with(
        g,
        &BsParams::from_constants(epsilon, constants),
        root.derive("full-hierarchy", 0).seed_u64(),
    )?
    .prune(g)?;
    // Same leader as the one simulate_star elects below, which is where it is charged.
    let global = prepare_global(g, seed)?;
    let sources: Vec<NodeId> = (0..n).collect();
    let plan = schedule_bfs_on(g, &global, &sources, None, root.derive("full-delays", 0).seed_u64(), constants)
        .map_err(AggError::from)?;
    let sim = simulate_star(
        g,
        &plan.program,
        &plan.program,
        &plan.inputs,
        &h,
        plan.t_a,
        seed,
        &AggParams::from_constants(constants),
    )?;

    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("hierarchy", &h.metrics);
    metrics.append_sequential("schedule", &plan.metrics);
    metrics.append_sequential("simulation", &sim.metrics);
    metrics.in_bits = sim.metrics.in_bits;
    metrics.out_bits = sim.metrics.out_bits;
    metrics.broadcasts = sim.broadcasts;
    let late = sim.outputs.iter().map(|o| o.late).sum();
    let trees = sim.outputs.into_iter().map(|o| o.trees).collect();
    Ok(MultiBfsRun { trees, depth_limit: None, metrics, broadcasts: sim.broadcasts, late, schedule: None, audit: None })
}

/// Batches of a depth-limited multi-BFS, each planned by random delays.
#[derive(Clone)]
pub struct LimitedPlan {
    /// Sources of each batch, in instance order.
    pub batches: Vec<Vec<NodeId>>,
    /// One component per batch.
    pub components: Vec<Component<MultiBfs>>,
    /// `L = ⌈c_d · n^{1−ε} · log₂ n⌉`.
    pub depth_limit: u64,
    /// Cost of distributing the delays of every batch.
    pub metrics: SimMetrics,
}

/// Splits the `n` sources into `⌈n^ε⌉` contiguous batches and schedules each one with depth
/// limit `L` over the leader's tree.
pub fn limited_plan(g: &Graph, epsilon: f64, seed: u64, constants: &Constants) -> Result<LimitedPlan, ApspError> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(ApspError::Epsilon(epsilon));
    }
    connected(g)?;
    let n = g.n();
    let root = RandomStream::new(seed);
    let depth_limit = ceil_usize(constants.depth_factor * powf(n, 1.0 - epsilon) * log2_at_least_one(n)) as u64;
    let b = pow_ceil(n, epsilon).clamp(1, n);
    let size = n.div_ceil(b);
    let global: GlobalTree = prepare_global(g, seed)?;
    let mut batches = Vec::new();
    let mut components = Vec::new();
    let mut metrics = SimMetrics::with_edges(g.m());
    for (j, chunk) in (0..n).collect::<Vec<_>>().chunks(size).enumerate() {
        let plan = schedule_bfs_on(
            g,
            &global,
            chunk,
            Some(depth_limit),
            root.derive("limited-delays", j as u64).seed_u64(),
            constants,
        )
        .map_err(AggError::from)?;
        metrics.append_sequential("schedule", &plan.metrics);
        components.push(Component {
            program: plan.program,
            inputs: plan.inputs,
            t_a: plan.t_a,
            seed: root.derive("limited-run", j as u64).seed_u64(),
        });
        batches.push(chunk.to_vec());
    }
    Ok(LimitedPlan { batches, components, depth_limit, metrics })
}

/// Per-node trees of the whole source set from per-batch outputs.
pub fn merge_batches(n: usize, batches: &[Vec<NodeId>], outputs: &[Vec<MultiBfsOutput>]) -> (TreeTable, u64) {
    let mut trees = vec![vec![None; n]; n];
    let mut late = 0;
    for (batch, out) in batches.iter().zip(outputs) {
        for (v, o) in out.iter().enumerate() {
            late += o.late;
            for (j, &s) in batch.iter().enumerate() {
                trees[v][s] = o.trees[j];
            }
        }
    }
    (trees, late)
}

/// BFS from every node up to depth `L`, `ε ∈ (0, 1/2]`: the batches of [`limited_plan`]
/// combined by [`combine_with_smoothing`] under [`crate::aggsim::simulate_general`].
pub fn multi_bfs_limited(g: &Graph, epsilon: f64, seed: u64, constants: &Constants) -> Result<MultiBfsRun, ApspError> {
    let plan = limited_plan(g, epsilon, seed, constants)?;
    let run = combine_with_smoothing(
        g,
        &plan.components,
        &BsParams::from_constants(epsilon, constants),
        Simulator::General,
        seed,
        &AggParams::from_constants(constants),
    )?;
    let mut metrics = plan.metrics.clone();
    metrics.append_sequential("combined", &run.metrics);
    metrics.in_bits = run.metrics.in_bits;
    metrics.out_bits = run.metrics.out_bits;
    metrics.broadcasts = run.broadcasts;
    let (trees, late) = merge_batches(g.n(), &plan.batches, &run.outputs);
    Ok(MultiBfsRun {
        trees,
        depth_limit: Some(plan.depth_limit),
        metrics,
        broadcasts: run.broadcasts,
        late,
        schedule: Some(run.schedule),
        audit: Some(run.audit),
    })
}

/// Landmarks with their BFS trees and the distances they resolve.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkRun {
    /// `partial` lowered by every via-landmark distance.
    pub distances: DistanceMatrix,
    /// Sampled landmarks.
    pub landmarks: Vec<NodeId>,
    /// Per landmark, its tree as `(child, parent)` pairs.
    pub trees: Vec<Vec<(NodeId, NodeId)>>,
    /// Sampling constant after doublings.
    pub factor: f64,
    /// Cost.
    pub metrics: SimMetrics,
}

/// Each node joins with probability `min(1, c · ln n · n^{ε−1})`; when nobody joins (the
/// leader learns this by a convergecast) `c` doubles and the nodes draw again.
pub fn sample_landmarks(
    g: &Graph,
    global: &GlobalTree,
    epsilon: f64,
    seed: u64,
    factor: f64,
) -> (Vec<NodeId>, f64, SimMetrics) {
    let n = g.n();
    let mut c = factor;
    let mut metrics = SimMetrics::with_edges(g.m());
    for a in 0u64.. {
        let p = (c * ln_at_least_one(n) * powf(n, epsilon - 1.0)).min(1.0);
        let stream = RandomStream::new(seed).derive("landmarks", a);
        let chosen: Vec<NodeId> =
            (0..n).filter(|&v| p >= 1.0 || stream.derive("node", v as u64).rng().gen::<f64>() < p).collect();
        metrics.append_sequential("landmark-count", &tree_echo_cost(g, &global.tree));
        if !chosen.is_empty() {
            return (chosen, c, metrics);
        }
        c *= 2.0;
    }
    unreachable!("p reaches 1 after finitely many doublings")
}

/// Runs a BFS from every landmark; each root collects its tree's edges by upcast and floods
/// them down the tree. Every node then knows every landmark depth and lowers its entries by
/// `depth_ℓ(u) + depth_ℓ(v)`.
pub fn resolve_with_landmarks(
    g: &Graph,
    partial: &DistanceMatrix,
    landmarks: &[NodeId],
    seed: u64,
) -> Result<LandmarkResolution, ApspError> {
    let n = g.n();
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut depths: Vec<Vec<u64>> = Vec::with_capacity(landmarks.len());
    let mut trees = Vec::with_capacity(landmarks.len());
    for (i, &l) in landmarks.iter().enumerate() {
        let mut roots = vec![false; n];
        roots[l] = true;
        let run = run_bcongest(
            g,
            &Bfs { depth_limit: None },
            &roots,
            n as u64 + 1,
            RandomStream::new(seed).derive("landmark-bfs", i as u64).seed_u64(),
        )?;
        metrics.append_sequential("landmark-bfs", &run.metrics);
        let parent: Vec<Option<NodeId>> = run.outputs.iter().map(|o| o.1).collect();
        let forest = ClusterForest::from_parents(g, parent.clone(), &vec![true; n])?;
        let words: Vec<Vec<u64>> =
            (0..n).map(|v| parent[v].map(|p| vec![v as u64, p as u64]).unwrap_or_default()).collect();
        let up = upcast(g, &forest, &words)?;
        metrics.append_sequential("landmark-upcast", &up.metrics);
        metrics.append_sequential("landmark-flood", &tree_flood_cost(g, &forest, 2 * (n as u64 - 1)));
        depths.push(run.outputs.iter().map(|o| o.0.expect("connected graph")).collect());
        trees.push((0..n).filter_map(|v| parent[v].map(|p| (v, p))).collect());
    }
    let mut out = partial.clone();
    for d in &depths {
        for u in 0..n {
            for v in 0..n {
                out.relax(u, v, d[u] + d[v]);
            }
        }
    }
    Ok((out, trees, metrics))
}

/// Samples landmarks over a fresh leader tree and resolves `partial` with them.
pub fn landmark_phase(
    g: &Graph,
    epsilon: f64,
    partial: &DistanceMatrix,
    seed: u64,
    constants: &Constants,
) -> Result<LandmarkRun, ApspError> {
    connected(g)?;
    let root = RandomStream::new(seed);
    let global = setup_global(g, root.derive("landmark-leader", 0).seed_u64())?;
    let (landmarks, factor, sampling) =
        sample_landmarks(g, &global, epsilon, root.derive("landmark-sample", 0).seed_u64(), constants.landmark_factor);
    let (distances, trees, resolve) = resolve_with_landmarks(g, partial, &landmarks, seed)?;
    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("leader", &global.metrics);
    metrics.append_sequential("sampling", &sampling);
    metrics.append_sequential("trees", &resolve);
    Ok(LandmarkRun { distances, landmarks, trees, factor, metrics })
}

/// Regime used for `ε` on `n` nodes.
pub fn regime_for(n: usize, epsilon: f64) -> Regime {
    let eps0 = 1.0 / log2_ceil(n).max(1) as f64;
    if epsilon <= eps0 {
        Regime::Weighted
    } else if epsilon < 0.5 {
        Regime::Limited
    } else {
        Regime::Full
    }
}

fn run_regime(g: &Graph, epsilon: f64, regime: Regime, seed: u64, constants: &Constants) -> Result<ApspRun, ApspError> {
    match regime {
        Regime::Weighted => apsp_weighted_msgopt(g, seed, constants),
        Regime::Full => {
            let run = multi_bfs_full(g, epsilon, seed, constants)?;
            Ok(ApspRun {
                distances: run.distances(),
                broadcasts: run.broadcasts,
                metrics: run.metrics,
                regime,
                attempts: 1,
                t_a: 0,
            })
        }
        Regime::Limited => {
            let run = multi_bfs_limited(g, epsilon, seed, constants)?;
            let lm = landmark_phase(g, epsilon, &run.distances(), seed, constants)?;
            let mut metrics = run.metrics.clone();
            metrics.append_sequential("landmarks", &lm.metrics);
            metrics.broadcasts = run.broadcasts;
            Ok(ApspRun { distances: lm.distances, broadcasts: run.broadcasts, metrics, regime, attempts: 1, t_a: 0 })
        }
    }
}

/// Unweighted APSP with round/message trade-off `ε`:
///
/// * `ε ≤ 1/⌈log₂ n⌉`: [`apsp_weighted_msgopt`] with unit weights;
/// * `ε < 1/2`: [`multi_bfs_limited`] then [`landmark_phase`];
/// * `ε ≥ 1/2`: [`multi_bfs_full`].
///
/// Each run is checked with [`bfs_certificate`] (not charged); on failure the solver reruns
/// with a derived seed, at most [`MAX_RESEEDS`] times. Failed runs are charged.
pub fn apsp_unweighted_tradeoff(
    g: &Graph,
    epsilon: f64,
    seed: u64,
    constants: &Constants,
) -> Result<ApspRun, ApspError> {
    if g.is_weighted() {
        return Err(ApspError::Weighted);
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(ApspError::Epsilon(epsilon));
    }
    connected(g)?;
    let regime = regime_for(g.n(), epsilon);
    let mut total = SimMetrics::with_edges(g.m());
    let mut broadcasts = 0;
    let mut witness = (0, 0);
    for a in 0..=MAX_RESEEDS {
        let s = if a == 0 { seed } else { RandomStream::new(seed).derive("reseed", a as u64).seed_u64() };
        let run = run_regime(g, epsilon, regime, s, constants)?;
        total.append_sequential("attempt", &run.metrics);
        total.in_bits = run.metrics.in_bits;
        total.out_bits = run.metrics.out_bits;
        broadcasts += run.broadcasts;
        total.broadcasts = broadcasts;
        match bfs_certificate(g, &run.distances) {
            Ok(()) => {
                return Ok(ApspRun {
                    distances: run.distances,
                    metrics: total,
                    broadcasts,
                    regime,
                    attempts: a + 1,
                    t_a: run.t_a,
                })
            }
            Err(w) => witness = w,
        }
    }
    Err(ApspError::Validation { attempts: MAX_RESEEDS + 1, src: witness.0, node: witness.1 })
}
