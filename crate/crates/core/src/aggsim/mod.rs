//! Simulations of aggregation-based BCONGEST programs over pruned Baswana-Sen hierarchies.
//!
//! Unlike [`crate::bcsim`], every node keeps running its own state. A phase `p` reproduces
//! round `p` of the simulated program in the aggregate sense: every node ends up with a set of
//! aggregates whose union, fed to its transition, gives the same state as the full round-`p`
//! inbox. Two protocols are provided: [`simulate_general`] for any hierarchy and
//! [`simulate_star`] for hierarchies with at most three levels (`ε ≥ 1/2`).
//!
//! The module also holds the random-delay multi-BFS scheduler ([`schedule_bfs`]), the central
//! congestion+dilation schedule ([`central_schedule`]) and congestion smoothing over
//! hierarchy ensembles ([`combine_with_smoothing`]).

mod general;
mod schedule;
mod smoothing;
mod star;

use alloc::vec;
use alloc::vec::Vec;

pub use general::simulate_general;
pub use schedule::{
    audit_distinct_sources, schedule_bfs, schedule_bfs_on, MultiBfs, MultiBfsOutput, MultiBfsState, ScheduleError,
    ScheduleMode, ScheduleSpec, ScheduledBfs, SourceAudit, TAG_MULTI_BFS,
};
pub use smoothing::{
    central_schedule, combine_on_hierarchies, combine_with_smoothing, CombinedRun, Component, CongestionAudit,
    DecomposableAlgorithm, ScheduleReport, Simulator,
};
pub use star::{greedy_maximal_matching, is_maximal_matching, simulate_star};

use crate::cluster::global::{setup_global, GlobalError, GlobalTree};
use crate::cluster::{packet_tokens, upcast, BsError, BsHierarchy, CastError, ClusterForest, Routing};
use crate::constants::Constants;
use crate::graph::{EdgeId, Graph, NodeId};
use crate::math::{ceil_usize, log2_at_least_one, log2_ceil, powf};
use crate::random::RandomStream;
use crate::sim::{
    input_bits, output_bits, AggregationContract, Execution, Message, Mode, NodeCtx, NodeProgram, Outbox, PhaseMetrics,
    SimError, SimMetrics,
};

/// Failures of the hierarchy simulations.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AggError {
    /// A phase needed more rounds than its budget.
    #[error("phase {phase} needs {needed} rounds, budget is {budget}: constants too small")]
    Budget {
        /// Phase index.
        phase: u64,
        /// Rounds the phase took.
        needed: u64,
        /// Per-phase budget.
        budget: u64,
    },
    /// The program had not halted after `T_A` phases.
    #[error("program still running after the round bound {0}")]
    RoundBound(u64),
    /// A node's state differs from the shadow direct run.
    #[error("node {node} diverged from the direct run in phase {phase}")]
    Divergence {
        /// Phase index.
        phase: u64,
        /// Node.
        node: NodeId,
    },
    /// The aggregates reaching a node did not account for exactly its broadcasting neighbors.
    #[error("aggregates reaching node {node} in phase {phase} do not cover its broadcasting neighbors")]
    Coverage {
        /// Phase index.
        phase: u64,
        /// Receiver.
        node: NodeId,
    },
    /// An aggregate exceeded its word budget or was not a subset of its input.
    #[error("aggregate for node {node} in phase {phase} breaks the contract ({words} words, budget {budget})")]
    Contract {
        /// Phase index.
        phase: u64,
        /// Receiver.
        node: NodeId,
        /// Encoded size.
        words: usize,
        /// Budget.
        budget: usize,
    },
    /// The star protocol needs `κ ≤ 2`.
    #[error("star simulation needs at most three levels, hierarchy has kappa = {0}")]
    NotStar(usize),
    /// Hierarchy built for another node count.
    #[error("hierarchy has {hierarchy} nodes, graph has {graph}")]
    SizeMismatch {
        /// Nodes in the hierarchy.
        hierarchy: usize,
        /// Nodes in the graph.
        graph: usize,
    },
    /// Leader election failed.
    #[error(transparent)]
    Global(#[from] GlobalError),
    /// Engine or payload failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Malformed upcast.
    #[error(transparent)]
    Cast(#[from] CastError),
    /// Hierarchy construction failed.
    #[error(transparent)]
    Bs(#[from] BsError),
    /// Scheduler failure.
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Runtime options of the hierarchy simulations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggParams {
    /// Budget constant of [`simulate_general`]: `c₂ · n · log₂ n` rounds per phase.
    pub c2: f64,
    /// Budget constant of [`simulate_star`]: `c₃ · n^{1−ε} · log₂ n` rounds per phase.
    pub c3: f64,
    /// Run a direct execution in lockstep and compare every state after every phase; also
    /// checks aggregate coverage.
    pub shadow: bool,
    /// Keep per-phase edge loads (needed by the central schedule).
    pub trace: bool,
}

impl Default for AggParams {
    fn default() -> Self {
        AggParams::from_constants(&Constants::default())
    }
}

impl AggParams {
    /// Parameters taken from a constants set.
    pub fn from_constants(c: &Constants) -> Self {
        AggParams { c2: c.c2, c3: c.c3, shadow: cfg!(debug_assertions), trace: false }
    }
}

/// `⌈c₂ · n · log₂ n⌉`.
pub fn general_budget(n: usize, c2: f64) -> u64 {
    ceil_usize(c2 * n as f64 * log2_at_least_one(n)) as u64
}

/// `⌈c₃ · n^{1−ε} · log₂ n⌉`.
pub fn star_budget(n: usize, epsilon: f64, c3: f64) -> u64 {
    ceil_usize(c3 * powf(n, 1.0 - epsilon) * log2_at_least_one(n)) as u64
}

/// Edge loads of one phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseTrace {
    /// Phase index.
    pub p: u64,
    /// Rounds the phase's routing took (at most the budget).
    pub rounds: u64,
    /// Messages per edge, ascending by edge id, nonzero entries only.
    pub loads: Vec<(EdgeId, u64)>,
}

/// Result of a hierarchy simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct AggSimulation<O> {
    /// Per-node outputs (every node computes its own).
    pub outputs: Vec<O>,
    /// Cost of preprocessing and of `T_A` phases.
    pub metrics: SimMetrics,
    /// Broadcasts of the simulated program.
    pub broadcasts: u64,
    /// Phases until every node halted.
    pub active_phases: u64,
    /// `T_A`.
    pub t_a: u64,
    /// Rounds per phase.
    pub budget: u64,
    /// Per-phase loads of phases that sent something (when tracing).
    pub trace: Vec<PhaseTrace>,
    /// Tree edges of `C_1, ..., C_{κ−1}`.
    pub cluster_edges: Vec<bool>,
    /// Largest per-phase load over a cluster edge.
    pub max_phase_cluster_load: u64,
    /// Largest per-phase load over any other edge.
    pub max_phase_other_load: u64,
}

/// What the centers know after the edge upcast, plus lookups derived from the hierarchy.
#[derive(Clone, Debug)]
pub struct Knowledge<'h> {
    h: &'h BsHierarchy,
    /// Per level `i < κ`, per node, the path to its `C_i` center (empty outside `V_i`).
    paths: Vec<Vec<Vec<NodeId>>>,
    /// Per node `u`, `(center, endpoint)` of each of its F edges, sorted by center.
    f_into: Vec<Vec<(NodeId, NodeId)>>,
    /// Cost of the per-level edge upcasts.
    pub metrics: SimMetrics,
}

impl<'h> Knowledge<'h> {
    fn levels(&self) -> usize {
        self.h.kappa
    }

    fn forest(&self, i: usize) -> &ClusterForest {
        &self.h.levels[i].clusters
    }

    /// Levels `i` with `v ∈ V_i`, restricted to `i < κ`.
    fn member_levels(&self, v: NodeId) -> core::ops::Range<usize> {
        0..self.h.low_level[v].min(self.h.kappa)
    }

    fn endpoint(&self, u: NodeId, center: NodeId) -> Option<NodeId> {
        let list = &self.f_into[u];
        list.binary_search_by_key(&center, |&(c, _)| c).ok().map(|k| list[k].1)
    }
}

/// Upcasts, level by level, every member's incident edges (neighbor ids plus one flag bit per
/// level) to its cluster center, and derives the lookups the phases need.
pub fn learn_hierarchy<'h>(g: &Graph, h: &'h BsHierarchy) -> Result<Knowledge<'h>, AggError> {
    let n = g.n();
    if h.n() != n {
        return Err(AggError::SizeMismatch { hierarchy: h.n(), graph: n });
    }
    let word_bits = (log2_ceil(n) + 8) as usize;
    let mut metrics = SimMetrics::with_edges(g.m());
    let mut paths = Vec::with_capacity(h.kappa);
    for i in 0..h.kappa {
        let f = &h.levels[i].clusters;
        paths.push((0..n).map(|v| if f.contains(v) { f.path_to_center(v) } else { Vec::new() }).collect::<Vec<_>>());
        if i == 0 {
            continue;
        }
        let words: Vec<Vec<u64>> = (0..n)
            .map(|v| {
                if !f.contains(v) || f.is_center(v) {
                    return Vec::new();
                }
                let d = g.degree(v);
                let flags = (d * (h.kappa + 1)).div_ceil(word_bits);
                let mut w: Vec<u64> = g.neighbors(v).iter().map(|&(u, _)| u as u64).collect();
                w.resize(d + flags, 0);
                w
            })
            .collect();
        let up = upcast(g, f, &words)?;
        metrics.append_sequential("upcast-edges", &up.metrics);
    }
    let mut f_into = vec![Vec::new(); n];
    for (u, into) in f_into.iter_mut().enumerate() {
        let j = h.low_level[u];
        if j == 0 {
            continue;
        }
        let below = &h.levels[j - 1].clusters;
        let mut list: Vec<(NodeId, NodeId)> =
            h.levels[j].f_out[u].iter().map(|&(w, _)| (below.center(w).expect("F edges end in V_{j-1}"), w)).collect();
        list.sort_unstable();
        *into = list;
    }
    Ok(Knowledge { h, paths, f_into, metrics })
}

/// Per-phase working state shared by both protocols.
pub(crate) struct PhaseIo {
    /// Broadcasting neighbors of each node, ascending; only filled for `touched` nodes.
    pub heard: Vec<Vec<NodeId>>,
    /// Nodes with at least one broadcasting neighbor, ascending.
    pub touched: Vec<NodeId>,
    /// Aggregates delivered to each node.
    packets: Vec<Vec<(NodeId, Message)>>,
    /// Senders covered by the inputs of those aggregates (coverage audit).
    covered: Vec<Vec<NodeId>>,
    pushes: usize,
    audit: bool,
}

impl PhaseIo {
    pub fn new(n: usize, audit: bool) -> Self {
        PhaseIo {
            heard: vec![Vec::new(); n],
            touched: Vec::new(),
            packets: vec![Vec::new(); n],
            covered: vec![Vec::new(); n],
            pushes: 0,
            audit,
        }
    }

    /// Clears the previous phase and records who hears whom in this one.
    fn start(&mut self, g: &Graph, sent: &[Option<Message>]) {
        for &u in &self.touched {
            self.heard[u].clear();
            self.packets[u].clear();
            self.covered[u].clear();
        }
        self.touched.clear();
        self.pushes = 0;
        for x in (0..g.n()).filter(|&x| sent[x].is_some()) {
            for &(u, _) in g.neighbors(x) {
                if self.heard[u].is_empty() {
                    self.touched.push(u);
                }
                self.heard[u].push(x);
            }
        }
        self.touched.sort_unstable();
    }

    /// Applies `agg_{u,p}` to `input`, checks the contract and records the packet at `u`.
    /// Returns the encoded size, or `None` for an empty input.
    pub fn deliver<C: AggregationContract + ?Sized>(
        &mut self,
        contract: &C,
        u: NodeId,
        p: u64,
        input: &[(NodeId, Message)],
    ) -> Result<Option<usize>, AggError> {
        if input.is_empty() {
            return Ok(None);
        }
        let agg = contract.aggregate(u, p, input);
        let words = contract.encoded_words(&agg);
        let budget = contract.word_budget(&agg);
        if words > budget || agg.iter().any(|x| !input.contains(x)) {
            return Err(AggError::Contract { phase: p, node: u, words, budget });
        }
        if self.audit {
            self.covered[u].extend(input.iter().map(|&(x, _)| x));
            self.pushes += input.len();
        }
        self.packets[u].extend(agg);
        Ok(Some(words))
    }

    /// Delivers a raw message (a one-element aggregate that needs no compression).
    pub fn deliver_raw(&mut self, u: NodeId, x: NodeId, m: Message) {
        if self.audit {
            self.covered[u].push(x);
            self.pushes += 1;
        }
        self.packets[u].push((x, m));
    }

    /// Checks that the inputs reaching every node cover exactly its broadcasting neighbors.
    fn check_coverage(&mut self, p: u64) -> Result<(), AggError> {
        if !self.audit {
            return Ok(());
        }
        let mut seen = 0;
        for &u in &self.touched {
            let got = &mut self.covered[u];
            seen += got.len();
            got.sort_unstable();
            got.dedup();
            if *got != self.heard[u] {
                return Err(AggError::Coverage { phase: p, node: u });
            }
        }
        // Deliveries to nodes without broadcasting neighbors.
        if seen != self.pushes {
            let node = (0..self.covered.len()).find(|&u| !self.covered[u].is_empty() && self.heard[u].is_empty());
            return Err(AggError::Coverage { phase: p, node: node.unwrap_or(0) });
        }
        Ok(())
    }

    /// The union of the aggregates at `u`, deduplicated and sender-sorted.
    fn inbox(&mut self, u: NodeId) -> Vec<(NodeId, Message)> {
        let mut inbox = core::mem::take(&mut self.packets[u]);
        inbox.sort_unstable();
        inbox.dedup();
        inbox
    }
}

/// Outbox of every non-halted node for round `p`.
pub(crate) fn collect_broadcasts<P: NodeProgram>(
    g: &Graph,
    program: &P,
    states: &[P::State],
    p: u64,
) -> Result<Vec<Option<Message>>, AggError> {
    let n = g.n();
    let mut sent = vec![None; n];
    for v in 0..n {
        if program.halted(&states[v]) {
            continue;
        }
        match program.emit(&NodeCtx::new(g, v), &states[v], p) {
            Outbox::Silent => {}
            Outbox::Broadcast(m) => {
                m.check_budget(n).map_err(|source| SimError::Payload { node: v, round: p, source })?;
                sent[v] = Some(m);
            }
            Outbox::PerNeighbor(_) => return Err(SimError::NotABroadcast { node: v, round: p }.into()),
        }
    }
    Ok(sent)
}

pub(crate) fn check_mode<P: NodeProgram>(program: &P) -> Result<(), AggError> {
    if program.mode() != Mode::Bcongest {
        return Err(SimError::ModeMismatch { declared: program.mode(), requested: Mode::Bcongest }.into());
    }
    Ok(())
}

/// Accumulates the routing reports of one phase into totals, trace and load maxima.
pub(crate) struct PhaseLedger {
    scratch: Vec<u64>,
    touched: Vec<EdgeId>,
    pub rounds: u64,
    pub messages_send: u64,
    pub messages_receive: u64,
}

impl PhaseLedger {
    pub fn new(m: usize) -> Self {
        PhaseLedger { scratch: vec![0; m], touched: Vec::new(), rounds: 0, messages_send: 0, messages_receive: 0 }
    }

    pub fn add(&mut self, report: &crate::cluster::RouteReport, totals: &mut SimMetrics, receive: bool) {
        self.rounds += report.rounds;
        if receive {
            self.messages_receive += report.messages;
        } else {
            self.messages_send += report.messages;
        }
        report.charge_into(totals);
        for &(e, c) in &report.congestion {
            if self.scratch[e] == 0 {
                self.touched.push(e);
            }
            self.scratch[e] += c;
        }
    }

    /// Closes the phase: returns its loads (ascending) and resets.
    pub fn close(&mut self, cluster: &[bool], max_cluster: &mut u64, max_other: &mut u64) -> Vec<(EdgeId, u64)> {
        self.touched.sort_unstable();
        let loads: Vec<(EdgeId, u64)> = self.touched.iter().map(|&e| (e, self.scratch[e])).collect();
        for &(e, c) in &loads {
            let slot = if cluster[e] { &mut *max_cluster } else { &mut *max_other };
            *slot = (*slot).max(c);
            self.scratch[e] = 0;
        }
        self.touched.clear();
        self.rounds = 0;
        self.messages_send = 0;
        self.messages_receive = 0;
        loads
    }
}

/// Leader, BFS tree and count, shared by all simulations over one graph.
pub fn prepare_global(g: &Graph, seed: u64) -> Result<GlobalTree, AggError> {
    Ok(setup_global(g, RandomStream::new(seed).derive("agg-leader", 0).seed_u64())?)
}

/// Runs the phase loop shared by both protocols. `phase` routes one phase: it fills `io` with
/// the aggregates every node receives and returns the routed batches in order, each flagged
/// as part of the receive step or not. Returns the phases-only cost.
#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<P, F>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    t_a: u64,
    budget: u64,
    seed: u64,
    params: &AggParams,
    cluster_edges: Vec<bool>,
    mut phase: F,
) -> Result<AggSimulation<P::Output>, AggError>
where
    P: NodeProgram,
    P::State: PartialEq,
    F: FnMut(&[Option<Message>], u64, &mut PhaseIo) -> Result<Vec<(crate::cluster::RouteReport, bool)>, AggError>,
{
    check_mode(program)?;
    let n = g.n();
    if inputs.len() != n {
        return Err(SimError::InputCount { expected: n, got: inputs.len() }.into());
    }
    let ctxs: Vec<NodeCtx<'_>> = (0..n).map(|v| NodeCtx::new(g, v)).collect();
    let mut states: Vec<P::State> =
        (0..n).map(|v| program.init(&ctxs[v], &inputs[v], &RandomStream::node_round(seed, v, 0))).collect();
    let mut shadow = if params.shadow { Some(Execution::new(g, program, inputs, seed, Mode::Bcongest)?) } else { None };

    let mut phases = SimMetrics::with_edges(g.m());
    let mut ledger = PhaseLedger::new(g.m());
    let mut trace = Vec::new();
    let (mut max_cluster, mut max_other) = (0u64, 0u64);
    let mut broadcasts = 0u64;
    let mut io = PhaseIo::new(n, params.shadow);
    let mut p = 0u64;
    while !states.iter().all(|s| program.halted(s)) {
        if p >= t_a {
            return Err(AggError::RoundBound(t_a));
        }
        p += 1;
        let sent = collect_broadcasts(g, program, &states, p)?;
        let senders = sent.iter().filter(|m| m.is_some()).count() as u64;
        broadcasts += senders;
        io.start(g, &sent);
        let mut metrics = PhaseMetrics { p, broadcasters: senders, ..PhaseMetrics::default() };
        if senders > 0 {
            for (report, receive) in phase(&sent, p, &mut io)? {
                ledger.add(&report, &mut phases, receive);
            }
            if ledger.rounds > budget {
                return Err(AggError::Budget { phase: p, needed: ledger.rounds, budget });
            }
            metrics.messages_step1 = ledger.messages_send;
            metrics.messages_step2 = ledger.messages_receive;
            metrics.rounds = ledger.rounds;
            let loads = ledger.close(&cluster_edges, &mut max_cluster, &mut max_other);
            if params.trace {
                trace.push(PhaseTrace { p, rounds: metrics.rounds, loads });
            }
        }
        phases.per_phase.push(metrics);
        io.check_coverage(p)?;
        let touched = core::mem::take(&mut io.touched);
        let mut next = touched.iter().copied().peekable();
        for u in 0..n {
            let inbox = if next.peek() == Some(&u) {
                next.next();
                io.inbox(u)
            } else {
                Vec::new()
            };
            program.transition(&ctxs[u], &mut states[u], p, &inbox, &RandomStream::node_round(seed, u, p));
        }
        io.touched = touched;
        if let Some(exec) = shadow.as_mut() {
            exec.step()?;
            if let Some(node) = (0..n).find(|&v| exec.states()[v] != states[v]) {
                return Err(AggError::Divergence { phase: p, node });
            }
        }
    }
    phases.rounds = t_a * budget;
    phases.dilation = phases.rounds;
    phases.broadcasts = broadcasts;
    let outputs: Vec<P::Output> = states.iter().map(|s| program.output(s)).collect();
    phases.in_bits = input_bits(g, program, inputs);
    phases.out_bits = output_bits(g, program, &outputs);
    Ok(AggSimulation {
        outputs,
        metrics: phases,
        broadcasts,
        active_phases: p,
        t_a,
        budget,
        trace,
        cluster_edges,
        max_phase_cluster_load: max_cluster,
        max_phase_other_load: max_other,
    })
}

/// Prepends preprocessing to a phases-only run, keeping per-phase records and bit counts.
pub(crate) fn with_preprocessing<O>(pre: &SimMetrics, mut run: AggSimulation<O>) -> AggSimulation<O> {
    let mut total = pre.clone();
    total.append_sequential("phases", &run.metrics);
    total.per_phase = core::mem::take(&mut run.metrics.per_phase);
    total.in_bits = run.metrics.in_bits;
    total.out_bits = run.metrics.out_bits;
    total.broadcasts = run.broadcasts;
    run.metrics = total;
    run
}

/// Broadcast of `x` with its sender id, in tokens.
pub(crate) fn item_tokens(m: &Message) -> usize {
    packet_tokens(1 + m.fields().len())
}

fn down(path: &[NodeId]) -> Vec<NodeId> {
    path.iter().rev().copied().collect()
}

/// The receive step shared by both protocols. `receipts` are `(sender, holder)` pairs of raw
/// messages that crossed into another cluster. Every holder upcasts its receipts to all of its
/// clusters, every broadcaster upcasts its own message to all of its clusters, and every
/// cluster center then sends each member the aggregate of what it holds from the member's
/// neighbors.
pub(crate) fn receive_steps<C: AggregationContract + ?Sized>(
    k: &Knowledge<'_>,
    contract: &C,
    sent: &[Option<Message>],
    receipts: &[(NodeId, NodeId)],
    p: u64,
    io: &mut PhaseIo,
) -> Result<(Routing, Routing), AggError> {
    let mut up = Routing::new();
    let mut held: Vec<Vec<(NodeId, NodeId)>> = vec![Vec::new(); k.levels()];
    for &(x, w) in receipts {
        let tokens = item_tokens(sent[x].as_ref().expect("receipt of a broadcast"));
        for i in k.member_levels(w) {
            let path = &k.paths[i][w];
            if path.len() > 1 {
                up.add_copies(path, tokens);
            }
            held[i].push((k.forest(i).center(w).expect("member"), x));
        }
    }
    for (x, m) in sent.iter().enumerate() {
        let Some(m) = m else { continue };
        for i in k.member_levels(x).skip(1) {
            up.add_copies(&k.paths[i][x], item_tokens(m));
        }
    }
    for list in held.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let mut downs = Routing::new();
    let mut input = Vec::new();
    for t in 0..io.touched.len() {
        let u = io.touched[t];
        for i in k.member_levels(u) {
            let f = k.forest(i);
            let cu = f.center(u).expect("member");
            input.clear();
            for &x in &io.heard[u] {
                if f.center(x) == Some(cu) || held[i].binary_search(&(cu, x)).is_ok() {
                    input.push((x, sent[x].expect("broadcast")));
                }
            }
            if let Some(words) = io.deliver(contract, u, p, &input)? {
                if k.paths[i][u].len() > 1 {
                    downs.add_copies(&down(&k.paths[i][u]), packet_tokens(words));
                }
            }
        }
    }
    Ok((up, downs))
}
