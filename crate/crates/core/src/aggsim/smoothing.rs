use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::general::run_general;
use super::star::run_star;
use super::{learn_hierarchy, prepare_global, AggError, AggParams, AggSimulation, PhaseTrace};
use crate::cluster::{build_ensemble_with, BsHierarchy, BsParams};
use crate::graph::{EdgeId, Graph};
use crate::math::{ceil_usize, log2_at_least_one, log2_ceil};
use crate::random::RandomStream;
use crate::sim::{AggregationContract, NodeProgram, SimMetrics};

/// One independent BCONGEST component: a program that is its own aggregation contract.
#[derive(Clone)]
pub struct Component<P: NodeProgram> {
    /// The program.
    pub program: P,
    /// Per-node inputs.
    pub inputs: Vec<P::Input>,
    /// Round bound `T_A` of the component.
    pub t_a: u64,
    /// Seed of the component's node streams.
    pub seed: u64,
}

/// `ℓ` components whose per-node outputs are combined locally by the caller.
#[derive(Clone)]
pub struct DecomposableAlgorithm<P: NodeProgram> {
    /// The components.
    pub components: Vec<Component<P>>,
}

/// Which hierarchy simulation runs the components.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Simulator {
    /// [`super::simulate_general`].
    General,
    /// [`super::simulate_star`].
    Star,
}

/// Outcome of the central congestion+dilation schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleReport {
    /// Start delay of each component, in phases.
    pub delays: Vec<u64>,
    /// Steps (one phase length each before expansion).
    pub steps: u64,
    /// Total rounds of the schedule.
    pub rounds: u64,
    /// Largest total load on one edge over all components.
    pub congestion: u64,
    /// Largest standalone running time of a component.
    pub dilation: u64,
    /// Largest number of components sharing an edge within one step.
    pub max_overlap: u64,
    /// `congestion + dilation · ⌈log₂ n⌉`.
    pub bound: u64,
}

impl ScheduleReport {
    /// `rounds / bound`.
    pub fn ratio(&self) -> f64 {
        self.rounds as f64 / self.bound.max(1) as f64
    }
}

/// Combines traced components. Component `k` runs `t_a[k]` phases of `budget[k]` rounds;
/// with more than one component each is delayed by a uniform number of phases in
/// `[0, ⌈congestion / (B · log₂ n)⌉]`, `B` the largest budget. A step holds the phases that
/// fall on it; it is expanded so that the components sharing an edge take turns, which gives
/// `max(B, overlap · longest phase)` rounds. Empty steps take `B` rounds.
pub fn central_schedule(
    traces: &[&[PhaseTrace]],
    t_a: &[u64],
    budget: &[u64],
    n: usize,
    m: usize,
    seed: u64,
) -> ScheduleReport {
    let parts = traces.len();
    let mut total = vec![0u64; m];
    for trace in traces {
        for ph in trace.iter() {
            for &(e, c) in &ph.loads {
                total[e] += c;
            }
        }
    }
    let congestion = total.iter().copied().max().unwrap_or(0);
    let dilation = (0..parts).map(|k| t_a[k] * budget[k]).max().unwrap_or(0);
    let b = budget.iter().copied().max().unwrap_or(0);
    let range =
        if parts > 1 { ceil_usize(congestion as f64 / (b.max(1) as f64 * log2_at_least_one(n))) as u64 } else { 0 };
    let delays: Vec<u64> = (0..parts)
        .map(|k| RandomStream::new(seed).derive("central-delay", k as u64).rng().gen_range(0..=range))
        .collect();
    let steps = (0..parts).map(|k| delays[k] + t_a[k]).max().unwrap_or(0);

    let mut by_step: BTreeMap<u64, Vec<&PhaseTrace>> = BTreeMap::new();
    for (k, trace) in traces.iter().enumerate() {
        for ph in trace.iter() {
            by_step.entry(delays[k] + ph.p - 1).or_default().push(ph);
        }
    }
    let mut rounds = (steps - by_step.len() as u64) * b;
    let mut max_overlap = 0;
    let mut users: BTreeMap<EdgeId, u64> = BTreeMap::new();
    for phases in by_step.values() {
        users.clear();
        for ph in phases {
            for &(e, _) in &ph.loads {
                *users.entry(e).or_insert(0) += 1;
            }
        }
        let overlap = users.values().copied().max().unwrap_or(1).max(1);
        max_overlap = max_overlap.max(overlap);
        let longest = phases.iter().map(|ph| ph.rounds).max().unwrap_or(0);
        rounds += b.max(overlap * longest);
    }
    let bound = congestion + dilation * log2_ceil(n).max(1) as u64;
    ScheduleReport { delays, steps, rounds, congestion, dilation, max_overlap, bound }
}

/// Per-edge loads of a combined run, split by cluster edges.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CongestionAudit {
    /// Total load per edge over all components.
    pub per_edge: Vec<u64>,
    /// Edges that are cluster edges (tree edges of `C_1, ..., C_{κ−1}`) of some hierarchy used.
    pub cluster_mask: Vec<bool>,
    /// Largest total load on a cluster edge.
    pub max_cluster: u64,
    /// Largest total load on any other edge.
    pub max_other: u64,
    /// Sum of loads on cluster edges.
    pub cluster_total: u64,
    /// Sum of loads on other edges.
    pub other_total: u64,
    /// Largest edge load of each component on its own.
    pub per_component_max: Vec<u64>,
}

impl CongestionAudit {
    fn new(m: usize) -> Self {
        CongestionAudit {
            per_edge: vec![0; m],
            cluster_mask: vec![false; m],
            max_cluster: 0,
            max_other: 0,
            cluster_total: 0,
            other_total: 0,
            per_component_max: Vec::new(),
        }
    }

    fn finish(&mut self) {
        for (e, &c) in self.per_edge.iter().enumerate() {
            if self.cluster_mask[e] {
                self.max_cluster = self.max_cluster.max(c);
                self.cluster_total += c;
            } else {
                self.max_other = self.max_other.max(c);
                self.other_total += c;
            }
        }
    }
}

/// Outputs and costs of a combined run.
#[derive(Clone, Debug, PartialEq)]
pub struct CombinedRun<O> {
    /// Per component, per node outputs.
    pub outputs: Vec<Vec<O>>,
    /// Preprocessing, then the schedule (messages of every component, schedule length).
    pub metrics: SimMetrics,
    /// The central schedule.
    pub schedule: ScheduleReport,
    /// Congestion split.
    pub audit: CongestionAudit,
    /// Hierarchies that received at least one component.
    pub hierarchies_used: usize,
    /// Broadcasts over all components.
    pub broadcasts: u64,
}

/// Runs component `k` on `hierarchies[assign(k)]` and combines the runs with
/// [`central_schedule`]. One leader is elected; every used hierarchy is learned once.
pub fn combine_on_hierarchies<P>(
    g: &Graph,
    components: &[Component<P>],
    hierarchies: &[BsHierarchy],
    assign: &dyn Fn(usize) -> usize,
    simulator: Simulator,
    seed: u64,
    params: &AggParams,
) -> Result<CombinedRun<P::Output>, AggError>
where
    P: NodeProgram + AggregationContract,
    P::State: PartialEq,
{
    let m = g.m();
    let global = prepare_global(g, seed)?;
    let mut metrics = SimMetrics::with_edges(m);
    metrics.append_sequential("leader", &global.metrics);
    let mut used: Vec<usize> = (0..components.len()).map(assign).collect();
    used.sort_unstable();
    used.dedup();
    let mut knowledge = BTreeMap::new();
    for &i in &used {
        let k = learn_hierarchy(g, &hierarchies[i])?;
        metrics.append_sequential("learn-hierarchy", &k.metrics);
        knowledge.insert(i, k);
    }

    let traced = AggParams { trace: true, ..*params };
    let mut runs: Vec<AggSimulation<P::Output>> = Vec::with_capacity(components.len());
    for (k, c) in components.iter().enumerate() {
        let know = &knowledge[&assign(k)];
        let run = match simulator {
            Simulator::General => run_general(g, &c.program, &c.program, &c.inputs, know, c.t_a, c.seed, &traced)?,
            Simulator::Star => run_star(g, &c.program, &c.program, &c.inputs, know, c.t_a, c.seed, &traced)?,
        };
        runs.push(run);
    }

    let traces: Vec<&[PhaseTrace]> = runs.iter().map(|r| r.trace.as_slice()).collect();
    let t_a: Vec<u64> = runs.iter().map(|r| r.t_a).collect();
    let budget: Vec<u64> = runs.iter().map(|r| r.budget).collect();
    let schedule = central_schedule(&traces, &t_a, &budget, g.n(), m, seed);

    let mut audit = CongestionAudit::new(m);
    let mut combined = SimMetrics::with_edges(m);
    let mut broadcasts = 0;
    for &i in &used {
        for (e, c) in hierarchies[i].cluster_edge_mask(g).into_iter().enumerate() {
            audit.cluster_mask[e] |= c;
        }
    }
    for run in &runs {
        for (e, &c) in run.metrics.edge_congestion.iter().enumerate() {
            if c > 0 {
                combined.charge_edge(e, c);
                audit.per_edge[e] += c;
            }
        }
        audit.per_component_max.push(run.metrics.max_edge_congestion());
        broadcasts += run.broadcasts;
    }
    audit.finish();
    combined.rounds = schedule.rounds;
    combined.dilation = schedule.rounds;
    combined.broadcasts = broadcasts;
    metrics.append_sequential("schedule", &combined);
    metrics.broadcasts = broadcasts;
    metrics.in_bits = runs.iter().map(|r| r.metrics.in_bits).sum();
    metrics.out_bits = runs.iter().map(|r| r.metrics.out_bits).sum();
    let outputs = runs.into_iter().map(|r| r.outputs).collect();
    Ok(CombinedRun { outputs, metrics, schedule, audit, hierarchies_used: used.len(), broadcasts })
}

/// Builds `ζ = ⌈n^ε⌉` pruned hierarchies, runs component `k` on hierarchy `k mod ζ` and
/// combines the runs. The ensemble's construction is charged first.
pub fn combine_with_smoothing<P>(
    g: &Graph,
    components: &[Component<P>],
    bs: &BsParams,
    simulator: Simulator,
    seed: u64,
    params: &AggParams,
) -> Result<CombinedRun<P::Output>, AggError>
where
    P: NodeProgram + AggregationContract,
    P::State: PartialEq,
{
    let ensemble = build_ensemble_with(g, bs, RandomStream::new(seed).derive("smoothing", 0).seed_u64())?;
    let zeta = ensemble.zeta;
    let mut run = combine_on_hierarchies(g, components, &ensemble.hierarchies, &|k| k % zeta, simulator, seed, params)?;
    let mut metrics = ensemble.metrics.clone();
    metrics.append_sequential("combined", &run.metrics);
    metrics.in_bits = run.metrics.in_bits;
    metrics.out_bits = run.metrics.out_bits;
    metrics.broadcasts = run.broadcasts;
    run.metrics = metrics;
    Ok(run)
}
