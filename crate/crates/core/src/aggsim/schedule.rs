use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::{prepare_global, AggError};
use crate::cluster::global::{GlobalTree, SharedRandomness};
use crate::cluster::routing::tree_echo_cost;
use crate::constants::Constants;
use crate::graph::{Graph, NodeId};
use crate::math::{ceil_usize, ln_at_least_one, log2_ceil};
use crate::random::RandomStream;
use crate::sim::{AggregationContract, Execution, Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};

/// Tag of multi-BFS messages `[j, dist]`.
pub const TAG_MULTI_BFS: u8 = 50;

/// Scheduler failures.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    /// No sources, too many, a repeated one or one out of range.
    #[error("invalid source list: {0}")]
    Sources(&'static str),
    /// Some node had more broadcasts due in one round than there are slots, on every attempt.
    #[error("slot overflow after {attempts} attempts: {load} broadcasts due in one round, {slots} slots")]
    Overflow {
        /// Attempts made.
        attempts: u32,
        /// Worst load on the last attempt.
        load: u64,
        /// Slots per round.
        slots: u64,
    },
}

/// How a collection of components is interleaved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScheduleMode {
    /// BFS instances started after random delays, every round split into slots.
    BfsRandomDelay,
    /// Arbitrary components combined by the central congestion+dilation schedule.
    GeneralCentral,
}

/// Delays and expansion of a schedule.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleSpec {
    /// Mode.
    pub mode: ScheduleMode,
    /// Delay per component.
    pub delays: Vec<u64>,
    /// Slots per round (random-delay mode) or the largest per-step overlap (central mode).
    pub expansion: u64,
}

/// `ℓ` BFS instances interleaved by random delays. Round `r` is slot `(r − 1) mod X` of global
/// round `⌊(r − 1) / X⌋ + 1`; instance `j` starts in global round `d_j`, and a node that joins
/// instance `j` at depth `δ` broadcasts `[j, δ]` in one slot of global round `d_j + δ`.
/// Nodes at depth `depth_limit` join but do not forward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiBfs {
    /// `d_j` per instance.
    pub delays: Vec<u64>,
    /// Slots per global round.
    pub slots: u64,
    /// Depth limit (`u64::MAX` for none).
    pub depth_limit: u64,
    /// Distinct instances one aggregate may carry.
    pub source_budget: usize,
}

/// Node state of [`MultiBfs`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiBfsState {
    found: BTreeMap<usize, (u64, NodeId)>,
    queue: BTreeSet<(u64, usize)>,
    heard: BTreeMap<usize, (u64, NodeId)>,
    late: u64,
}

/// Per node: `(depth, parent)` per instance (the source is its own parent), and the number of
/// broadcasts sent after their global round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiBfsOutput {
    /// Tree membership per instance.
    pub trees: Vec<Option<(u64, NodeId)>>,
    /// Broadcasts that missed their round.
    pub late: u64,
}

impl MultiBfs {
    /// Global round and slot of engine round `r ≥ 1`.
    pub fn slot_of(&self, r: u64) -> (u64, u64) {
        ((r - 1) / self.slots + 1, (r - 1) % self.slots)
    }

    fn due(&self, state: &MultiBfsState, r: u64) -> Option<(u64, usize)> {
        let (t, _) = self.slot_of(r);
        state.queue.first().copied().filter(|&(t0, _)| t0 <= t)
    }
}

impl NodeProgram for MultiBfs {
    type Input = Vec<usize>;
    type State = MultiBfsState;
    type Output = MultiBfsOutput;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, input: &Vec<usize>, _: &RandomStream) -> MultiBfsState {
        let mut s = MultiBfsState::default();
        for &j in input {
            s.found.insert(j, (0, ctx.id()));
            if self.depth_limit > 0 {
                s.queue.insert((self.delays[j], j));
            }
        }
        s
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &MultiBfsState, r: u64) -> Outbox {
        match self.due(s, r) {
            Some((_, j)) => Outbox::Broadcast(Message::new(TAG_MULTI_BFS, &[j as u64, s.found[&j].0])),
            None => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        _: &NodeCtx<'_>,
        s: &mut MultiBfsState,
        r: u64,
        inbox: &[(NodeId, Message)],
        _: &RandomStream,
    ) {
        let (t, slot) = self.slot_of(r);
        if let Some(item) = self.due(s, r) {
            s.queue.remove(&item);
            if item.0 < t {
                s.late += 1;
            }
        }
        for &(u, m) in inbox {
            if m.tag() != TAG_MULTI_BFS {
                continue;
            }
            let j = m.field(0) as usize;
            if s.found.contains_key(&j) {
                continue;
            }
            let cand = (m.field(1), u);
            s.heard.entry(j).and_modify(|best| *best = (*best).min(cand)).or_insert(cand);
        }
        if slot + 1 == self.slots {
            for (j, (d, u)) in core::mem::take(&mut s.heard) {
                s.found.insert(j, (d + 1, u));
                if d + 1 < self.depth_limit {
                    s.queue.insert((t + 1, j));
                }
            }
        }
    }

    fn halted(&self, s: &MultiBfsState) -> bool {
        s.queue.is_empty() && s.heard.is_empty()
    }

    fn output(&self, s: &MultiBfsState) -> MultiBfsOutput {
        MultiBfsOutput { trees: (0..self.delays.len()).map(|j| s.found.get(&j).copied()).collect(), late: s.late }
    }

    fn input_words(&self, input: &Vec<usize>) -> usize {
        input.len().max(1)
    }

    fn output_words(&self, out: &MultiBfsOutput) -> usize {
        2 * out.trees.iter().filter(|t| t.is_some()).count()
    }
}

impl AggregationContract for MultiBfs {
    /// Keeps, per instance, the message with the smallest `(depth, sender)`.
    fn aggregate(&self, _: NodeId, _: u64, msgs: &[(NodeId, Message)]) -> Vec<(NodeId, Message)> {
        let mut best: BTreeMap<u64, (u64, NodeId, Message)> = BTreeMap::new();
        for &(u, m) in msgs {
            let cand = (m.field(1), u, m);
            best.entry(m.field(0)).and_modify(|b| *b = (*b).min(cand)).or_insert(cand);
        }
        let mut out: Vec<(NodeId, Message)> = best.into_values().map(|(_, u, m)| (u, m)).collect();
        out.sort_unstable();
        out
    }

    fn word_budget(&self, _: &[(NodeId, Message)]) -> usize {
        3 * self.source_budget
    }
}

/// A planned multi-BFS: the program, per-node inputs and the round bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledBfs {
    /// Sources in instance order.
    pub sources: Vec<NodeId>,
    /// The combined program.
    pub program: MultiBfs,
    /// Instances sourced at each node.
    pub inputs: Vec<Vec<usize>>,
    /// Delays and slots.
    pub spec: ScheduleSpec,
    /// `T_A = X · (ℓ + min(limit, 2·ecc(leader)) + 1)`.
    pub t_a: u64,
    /// Attempts used (each one redraws the delays).
    pub attempts: u32,
    /// Cost of distributing the delays and of the overflow checks.
    pub metrics: SimMetrics,
}

/// Plans a multi-BFS with a fresh leader; see [`schedule_bfs_on`].
pub fn schedule_bfs(
    g: &Graph,
    sources: &[NodeId],
    depth_limit: Option<u64>,
    seed: u64,
    constants: &Constants,
) -> Result<ScheduledBfs, AggError> {
    let global = prepare_global(g, seed)?;
    let mut s = schedule_bfs_on(g, &global, sources, depth_limit, seed, constants)?;
    let mut metrics = global.metrics.clone();
    metrics.append_sequential("schedule", &s.metrics);
    s.metrics = metrics;
    Ok(s)
}

/// Plans a multi-BFS over an existing leader tree. The leader draws `d_j` uniformly from
/// `[1, ℓ]` and pipelines them to every node; a convergecast then reports whether some node
/// has more than `X = ⌈c · log₂ n⌉` broadcasts due in one global round, in which case the
/// delays are redrawn.
pub fn schedule_bfs_on(
    g: &Graph,
    global: &GlobalTree,
    sources: &[NodeId],
    depth_limit: Option<u64>,
    seed: u64,
    constants: &Constants,
) -> Result<ScheduledBfs, ScheduleError> {
    let n = g.n();
    let ell = sources.len();
    if ell == 0 || ell > n {
        return Err(ScheduleError::Sources("need between 1 and n sources"));
    }
    if sources.iter().any(|&s| s >= n) {
        return Err(ScheduleError::Sources("source out of range"));
    }
    let mut inputs = vec![Vec::new(); n];
    for (j, &s) in sources.iter().enumerate() {
        if !inputs[s].is_empty() {
            return Err(ScheduleError::Sources("repeated source"));
        }
        inputs[s].push(j);
    }
    let limit = depth_limit.unwrap_or(u64::MAX);
    let slots = ceil_usize(constants.slot_factor * log2_ceil(n).max(1) as f64).max(1) as u64;
    let depth = (2 * global.tree.max_depth() as u64).min(limit);
    let t_a = slots * (ell as u64 + depth + 1);
    let source_budget = ceil_usize(constants.distinct_sources_factor * ln_at_least_one(n)).max(1);
    let hops: Vec<Vec<Option<u64>>> = sources.iter().map(|&s| g.bfs_hops(s)).collect();

    let attempts = constants.max_attempts.max(1);
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut worst = 0;
    for a in 0..attempts {
        let shared = SharedRandomness::distribute(g, global, seed, a as u64, ell);
        metrics.append_sequential("delays", &shared.metrics);
        let delays: Vec<u64> = (0..ell).map(|j| shared.segment_in(j, 1, ell as u64)).collect();
        worst = max_due(n, &delays, &hops, limit);
        metrics.append_sequential("overflow-check", &tree_echo_cost(g, &global.tree));
        if worst <= slots {
            let spec = ScheduleSpec { mode: ScheduleMode::BfsRandomDelay, delays: delays.clone(), expansion: slots };
            return Ok(ScheduledBfs {
                sources: sources.to_vec(),
                program: MultiBfs { delays, slots, depth_limit: limit, source_budget },
                inputs,
                spec,
                t_a,
                attempts: a + 1,
                metrics,
            });
        }
    }
    Err(ScheduleError::Overflow { attempts, load: worst, slots })
}

/// Largest number of broadcasts any node has due in one global round.
fn max_due(n: usize, delays: &[u64], hops: &[Vec<Option<u64>>], limit: u64) -> u64 {
    let mut due: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); n];
    let mut worst = 0;
    for (j, h) in hops.iter().enumerate() {
        for v in 0..n {
            if let Some(d) = h[v].filter(|&d| d < limit) {
                let c = due[v].entry(delays[j] + d).or_insert(0);
                *c += 1;
                worst = worst.max(*c);
            }
        }
    }
    worst
}

/// Distinct instances heard per node per global round over a direct run.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceAudit {
    /// Largest count over all nodes and global rounds.
    pub max_distinct: usize,
    /// `(node, global round)` pairs with a nonempty inbox.
    pub samples: u64,
    /// Outputs of the run.
    pub outputs: Vec<MultiBfsOutput>,
    /// Engine rounds of the run.
    pub rounds: u64,
}

/// Runs a planned multi-BFS directly and records, for every node and global round, how many
/// distinct instances it heard from.
pub fn audit_distinct_sources(g: &Graph, plan: &ScheduledBfs, seed: u64) -> Result<SourceAudit, SimError> {
    let n = g.n();
    let program = &plan.program;
    let exec = Execution::new(g, program, &plan.inputs, seed, Mode::Bcongest)?;
    let mut current: Vec<(u64, Vec<u64>)> = vec![(0, Vec::new()); n];
    let mut max_distinct = 0;
    let mut samples = 0u64;
    let mut observe = |v: NodeId, r: u64, _: &MultiBfsState, inbox: &[(NodeId, Message)]| {
        let (t, _) = program.slot_of(r);
        let cur = &mut current[v];
        if cur.0 != t {
            if !cur.1.is_empty() {
                samples += 1;
                max_distinct = max_distinct.max(cur.1.len());
            }
            *cur = (t, Vec::new());
        }
        for &(_, m) in inbox {
            if !cur.1.contains(&m.field(0)) {
                cur.1.push(m.field(0));
            }
        }
    };
    let run = exec.run_to_end(plan.t_a, &mut observe)?;
    for (_, seen) in &current {
        if !seen.is_empty() {
            samples += 1;
            max_distinct = max_distinct.max(seen.len());
        }
    }
    Ok(SourceAudit { max_distinct, samples, outputs: run.outputs, rounds: run.metrics.rounds })
}
