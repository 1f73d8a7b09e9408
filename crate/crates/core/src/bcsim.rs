//! Message-efficient re-execution of BCONGEST programs over a low-diameter decomposition.
//!
//! Every cluster center keeps a replica of each member's state. In phase `p` the centers
//! compute what their members broadcast in round `p`; a broadcast is delivered inside its own
//! cluster for free, and to each neighboring cluster by routing it down the tree to the
//! broadcaster, across the broadcaster's F edge into that cluster, and up to the other center.
//! Centers then apply the round-`p` transition of every member. Costs depend on the number of
//! broadcasts, not on the degrees of the broadcasters.

use alloc::vec;
use alloc::vec::Vec;

use crate::cluster::global::{setup_global, GlobalError};
use crate::cluster::{
    ldc_decompose_with, packet_tokens, upcast, CastError, ClusterForest, LdcDecomposition, LdcError, LdcParams, Routing,
};
use crate::constants::Constants;
use crate::graph::{Graph, NodeId};
use crate::math::{ceil_usize, log2_at_least_one};
use crate::random::RandomStream;
use crate::sim::{
    input_bits, output_bits, Execution, Message, Mode, NodeCtx, NodeProgram, Outbox, PhaseMetrics, SimError, SimMetrics,
};

/// Simulation failures.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BcError {
    /// Routing of a phase did not fit its round budget.
    #[error("phase {phase} needs {needed} rounds, budget is {budget}: constants too small")]
    Budget {
        /// Phase index.
        phase: u64,
        /// Rounds the routing took.
        needed: u64,
        /// `⌈c₁ · n · log₂ n⌉`.
        budget: u64,
    },
    /// The program had not halted after `T_A` phases.
    #[error("program still running after the round bound {0}")]
    RoundBound(u64),
    /// A replica diverged from the shadow direct run.
    #[error("replica of node {node} diverged in phase {phase}")]
    Divergence {
        /// Phase index.
        phase: u64,
        /// Node.
        node: NodeId,
    },
    /// Leader election or counting failed.
    #[error(transparent)]
    Global(#[from] GlobalError),
    /// Decomposition failed.
    #[error(transparent)]
    Ldc(#[from] LdcError),
    /// Engine or payload failure of the simulated program.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Malformed up/downcast.
    #[error(transparent)]
    Cast(#[from] CastError),
}

/// What the centers know after preprocessing.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterLedger<I, S> {
    /// Cluster trees.
    pub forest: ClusterForest,
    /// Per node, the neighbor ids its center learned by upcast.
    pub known_neighbors: Vec<Vec<NodeId>>,
    /// Per node, the input record held by its center.
    pub inputs: Vec<I>,
    /// Per node, the replicated state held by its center.
    pub states: Vec<S>,
}

/// Leader, decomposition and ledger, with their cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessed<I, S> {
    /// Elected leader.
    pub leader: NodeId,
    /// Network size as counted over the leader's tree.
    pub n: usize,
    /// The decomposition.
    pub decomposition: LdcDecomposition,
    /// Center knowledge.
    pub ledger: CenterLedger<I, S>,
    /// Cost of everything above.
    pub metrics: SimMetrics,
}

/// Outputs of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct BcSimulation<O> {
    /// Per-node outputs, as delivered by the final downcast.
    pub outputs: Vec<O>,
    /// Cost of preprocessing, all phases and the output downcast.
    pub metrics: SimMetrics,
    /// Broadcasts of the simulated program (`B_A`).
    pub broadcasts: u64,
    /// Phases in which some replica was still running.
    pub active_phases: u64,
    /// Inter-cluster hops that did not use an F edge (always 0 for a correct run).
    pub non_f_crossings: u64,
    /// Decomposition used.
    pub decomposition: LdcDecomposition,
}

/// Runtime options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcParams {
    /// Round budget constant `c₁`.
    pub c1: f64,
    /// Decomposition parameters.
    pub ldc: LdcParams,
    /// Compare every replica with a direct execution after each phase.
    pub shadow: bool,
}

impl Default for BcParams {
    fn default() -> Self {
        BcParams::from_constants(&Constants::default())
    }
}

impl BcParams {
    /// Parameters taken from a constants set.
    pub fn from_constants(c: &Constants) -> Self {
        BcParams {
            c1: c.c1,
            ldc: LdcParams { beta: c.ldc_beta, bound_factor: c.ldc_bound_factor, max_attempts: c.max_attempts },
            shadow: cfg!(debug_assertions),
        }
    }
}

/// Per-phase round budget `⌈c₁ · n · log₂ n⌉`.
pub fn phase_budget(n: usize, c1: f64) -> u64 {
    ceil_usize(c1 * n as f64 * log2_at_least_one(n)) as u64
}

/// Leader election and counting, the decomposition, and an upcast of every node's input and
/// incident edges to its center.
pub fn preprocess<P: NodeProgram>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    seed: u64,
    params: &BcParams,
) -> Result<Preprocessed<P::Input, P::State>, BcError> {
    let n = g.n();
    if inputs.len() != n {
        return Err(SimError::InputCount { expected: n, got: inputs.len() }.into());
    }
    let root = RandomStream::new(seed);
    let global = setup_global(g, root.derive("bc-leader", 0).seed_u64())?;
    let decomposition = ldc_decompose_with(g, &params.ldc, root.derive("bc-ldc", 0).seed_u64())?;
    let forest = decomposition.forest.clone();

    // Input words first (opaque), then neighbor ids, then weights if any.
    let words: Vec<Vec<u64>> = (0..n)
        .map(|v| {
            let mut w = vec![0u64; program.input_words(&inputs[v])];
            w.extend(g.neighbors(v).iter().map(|&(u, _)| u as u64));
            if g.is_weighted() {
                w.extend(g.neighbors(v).iter().map(|&(_, e)| g.weight(e)));
            }
            w
        })
        .collect();
    let up = upcast(g, &forest, &words)?;
    let mut known_neighbors = vec![Vec::new(); n];
    for list in &up.collected {
        let mut at = 0;
        while at < list.len() {
            let v = list[at].0;
            let skip = program.input_words(&inputs[v]);
            let deg = g.degree(v);
            known_neighbors[v] = list[at + skip..at + skip + deg].iter().map(|&(_, u)| u as NodeId).collect();
            at += words[v].len();
        }
    }
    let states =
        (0..n).map(|v| program.init(&NodeCtx::new(g, v), &inputs[v], &RandomStream::node_round(seed, v, 0))).collect();

    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("leader", &global.metrics);
    metrics.append_sequential("ldc", &decomposition.metrics);
    metrics.append_sequential("upcast-inputs", &up.metrics);
    Ok(Preprocessed {
        leader: global.leader,
        n,
        decomposition,
        ledger: CenterLedger { forest, known_neighbors, inputs: inputs.to_vec(), states },
        metrics,
    })
}

/// Simulates `program` for at most `t_a` rounds. Outputs equal those of
/// `run_bcongest(g, program, inputs, _, seed)`.
pub fn simulate<P>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    t_a: u64,
    seed: u64,
    params: &BcParams,
) -> Result<BcSimulation<P::Output>, BcError>
where
    P: NodeProgram,
    P::State: PartialEq,
{
    if program.mode() != Mode::Bcongest {
        return Err(SimError::ModeMismatch { declared: program.mode(), requested: Mode::Bcongest }.into());
    }
    let pre = preprocess(g, program, inputs, seed, params)?;
    let n = g.n();
    let Preprocessed { decomposition, ledger, metrics: mut total, .. } = pre;
    let CenterLedger { forest, known_neighbors, mut states, .. } = ledger;
    let budget = phase_budget(n, params.c1);
    let ctxs: Vec<NodeCtx<'_>> = (0..n).map(|v| NodeCtx::new(g, v)).collect();
    let down_paths: Vec<Vec<NodeId>> = (0..n)
        .map(|v| {
            let mut p = forest.path_to_center(v);
            p.reverse();
            p
        })
        .collect();
    let mut shadow = if params.shadow { Some(Execution::new(g, program, inputs, seed, Mode::Bcongest)?) } else { None };

    let mut phases = SimMetrics::with_edges(g.m());
    let mut broadcasts = 0u64;
    let mut non_f = 0u64;
    let mut stamp = vec![usize::MAX; n];
    let mut inboxes: Vec<Vec<(NodeId, Message)>> = vec![Vec::new(); n];
    let mut p = 0u64;
    while !states.iter().all(|s| program.halted(s)) {
        if p >= t_a {
            return Err(BcError::RoundBound(t_a));
        }
        p += 1;
        // Centers evaluate the round-p outboxes of their members.
        let mut sent: Vec<(NodeId, Message)> = Vec::new();
        for v in 0..n {
            if program.halted(&states[v]) {
                continue;
            }
            match program.emit(&ctxs[v], &states[v], p) {
                Outbox::Silent => {}
                Outbox::Broadcast(m) => {
                    m.check_budget(n).map_err(|source| SimError::Payload { node: v, round: p, source })?;
                    sent.push((v, m));
                }
                Outbox::PerNeighbor(_) => return Err(SimError::NotABroadcast { node: v, round: p }.into()),
            }
        }
        broadcasts += sent.len() as u64;

        // Step 1: down to the broadcaster and across its F edges; step 2: up to the other center.
        let mut step1 = Routing::new();
        let mut step2 = Routing::new();
        for (k, &(v, m)) in sent.iter().enumerate() {
            let tokens = packet_tokens(1 + m.fields().len());
            for &(w, _) in &decomposition.f_out[v] {
                let mut path = down_paths[v].clone();
                path.push(w);
                step1.add_copies(&path, tokens);
                step2.add_copies(&forest.path_to_center(w), tokens);
                let cw = forest.center(w).expect("clustered");
                if cw == forest.center(v).expect("clustered") {
                    non_f += 1;
                }
                stamp[cw] = k;
            }
            // Centers hand the message to every member adjacent to v: inside v's cluster
            // directly, elsewhere only if it arrived over an F edge.
            let cv = forest.center(v).expect("clustered");
            for &u in &known_neighbors[v] {
                let cu = forest.center(u).expect("clustered");
                if cu == cv || stamp[cu] == k {
                    inboxes[u].push((v, m));
                }
            }
            for &(w, _) in &decomposition.f_out[v] {
                stamp[forest.center(w).expect("clustered")] = usize::MAX;
            }
        }
        let r1 = step1.run(g);
        let r2 = step2.run(g);
        let needed = r1.rounds + r2.rounds;
        if needed > budget {
            return Err(BcError::Budget { phase: p, needed, budget });
        }
        r1.charge_into(&mut phases);
        r2.charge_into(&mut phases);
        phases.per_phase.push(PhaseMetrics {
            p,
            messages_step1: r1.messages,
            messages_step2: r2.messages,
            broadcasters: sent.len() as u64,
            rounds: needed,
        });

        for u in 0..n {
            inboxes[u].sort_unstable_by_key(|&(s, _)| s);
            program.transition(&ctxs[u], &mut states[u], p, &inboxes[u], &RandomStream::node_round(seed, u, p));
            inboxes[u].clear();
        }
        if let Some(exec) = shadow.as_mut() {
            exec.step()?;
            if let Some(node) = (0..n).find(|&v| exec.states()[v] != states[v]) {
                return Err(BcError::Divergence { phase: p, node });
            }
        }
    }
    phases.rounds = t_a * budget;
    phases.dilation = phases.rounds;
    total.append_sequential("phases", &phases);
    total.per_phase = phases.per_phase;

    let outputs: Vec<P::Output> = states.iter().map(|s| program.output(s)).collect();
    let mut down = Routing::new();
    for v in 0..n {
        down.add_copies(&down_paths[v], packet_tokens(program.output_words(&outputs[v])));
    }
    total.append_sequential("downcast-outputs", &down.run(g).to_metrics(g.m()));
    total.in_bits = input_bits(g, program, inputs);
    total.out_bits = output_bits(g, program, &outputs);
    Ok(BcSimulation { outputs, metrics: total, broadcasts, active_phases: p, non_f_crossings: non_f, decomposition })
}
