use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::{Message, Mode, NodeCtx, NodeProgram, Outbox, PayloadError, SimMetrics};
use crate::graph::{Graph, NodeId};
use crate::math::log2_ceil;
use crate::random::RandomStream;

/// Outputs and metrics of a finished execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run<O> {
    /// Per-node outputs, indexed by node id.
    pub outputs: Vec<O>,
    /// Exact costs.
    pub metrics: SimMetrics,
}

/// Execution failures.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    /// A message exceeded the payload budget.
    #[error("node {node} in round {round}: {source}")]
    Payload {
        /// Sender.
        node: NodeId,
        /// Round of the send.
        round: u64,
        /// What was wrong.
        source: PayloadError,
    },
    /// Some node had not halted after `max_rounds` rounds.
    #[error("not all nodes halted within {max_rounds} rounds")]
    Timeout {
        /// The round limit.
        max_rounds: u64,
        /// Metrics accumulated up to the limit.
        partial: Box<SimMetrics>,
    },
    /// Program mode differs from the engine entry point used.
    #[error("program declared for {declared:?} mode, run as {requested:?}")]
    ModeMismatch {
        /// Mode of the program.
        declared: Mode,
        /// Mode of the entry point.
        requested: Mode,
    },
    /// Per-neighbor outbox used under BCONGEST.
    #[error("node {node} in round {round} sent per-neighbor messages in BCONGEST mode")]
    NotABroadcast {
        /// Sender.
        node: NodeId,
        /// Round.
        round: u64,
    },
    /// Target is not adjacent to the sender.
    #[error("node {node} in round {round} addressed non-neighbor {target}")]
    NotANeighbor {
        /// Sender.
        node: NodeId,
        /// Round.
        round: u64,
        /// Addressee.
        target: NodeId,
    },
    /// Two messages over the same edge in one round.
    #[error("node {node} in round {round} sent twice to {target}")]
    DuplicateTarget {
        /// Sender.
        node: NodeId,
        /// Round.
        round: u64,
        /// Addressee.
        target: NodeId,
    },
    /// `inputs.len() != n`.
    #[error("expected {expected} inputs, got {got}")]
    InputCount {
        /// Node count.
        expected: usize,
        /// Inputs supplied.
        got: usize,
    },
    /// The engine runs on undirected communication graphs only.
    #[error("communication graph must be undirected")]
    Directed,
}

/// Runs a CONGEST program.
pub fn run_congest<P: NodeProgram>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    max_rounds: u64,
    seed: u64,
) -> Result<Run<P::Output>, SimError> {
    run_program(g, program, inputs, max_rounds, seed, Mode::Congest)
}

/// Runs a BCONGEST program. Each broadcast by `v` costs `deg(v)` messages.
pub fn run_bcongest<P: NodeProgram>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    max_rounds: u64,
    seed: u64,
) -> Result<Run<P::Output>, SimError> {
    run_program(g, program, inputs, max_rounds, seed, Mode::Bcongest)
}

/// Input size in bits: each node's input plus one id (and a weight, if weighted) per incident edge.
pub fn input_bits<P: NodeProgram>(g: &Graph, program: &P, inputs: &[P::Input]) -> u64 {
    let wb = log2_ceil(g.n()).max(1) as u64;
    let per_edge = if g.is_weighted() { 2 } else { 1 };
    (0..g.n()).map(|v| (program.input_words(&inputs[v]) + per_edge * g.degree(v)) as u64 * wb).sum()
}

/// Output size in bits.
pub fn output_bits<P: NodeProgram>(g: &Graph, program: &P, outputs: &[P::Output]) -> u64 {
    let wb = log2_ceil(g.n()).max(1) as u64;
    outputs.iter().map(|o| program.output_words(o) as u64 * wb).sum()
}

/// Validates an outbox and expands it into `(target, message)` pairs.
pub(crate) fn expand_outbox(
    g: &Graph,
    v: NodeId,
    round: u64,
    outbox: Outbox,
    mode: Mode,
    out: &mut Vec<(NodeId, Message)>,
) -> Result<bool, SimError> {
    out.clear();
    let n = g.n();
    match outbox {
        Outbox::Silent => Ok(false),
        Outbox::Broadcast(m) => {
            m.check_budget(n).map_err(|source| SimError::Payload { node: v, round, source })?;
            out.extend(g.neighbors(v).iter().map(|&(u, _)| (u, m)));
            Ok(true)
        }
        Outbox::PerNeighbor(list) => {
            if mode == Mode::Bcongest {
                return Err(SimError::NotABroadcast { node: v, round });
            }
            for (target, m) in list {
                m.check_budget(n).map_err(|source| SimError::Payload { node: v, round, source })?;
                if g.edge_between(v, target).is_none() {
                    return Err(SimError::NotANeighbor { node: v, round, target });
                }
                out.push((target, m));
            }
            out.sort_by_key(|&(t, _)| t);
            for w in out.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(SimError::DuplicateTarget { node: v, round, target: w[0].0 });
                }
            }
            Ok(false)
        }
    }
}

/// Step-by-step execution of a program; [`run_program`] drives it to completion.
///
/// Exposed so that simulations can keep a shadow direct execution in lockstep.
pub struct Execution<'g, 'p, P: NodeProgram> {
    g: &'g Graph,
    program: &'p P,
    seed: u64,
    mode: Mode,
    ctxs: Vec<NodeCtx<'g>>,
    states: Vec<P::State>,
    inboxes: Vec<Vec<(NodeId, Message)>>,
    sends: Vec<(NodeId, Message)>,
    round: u64,
    metrics: SimMetrics,
}

impl<'g, 'p, P: NodeProgram> Execution<'g, 'p, P> {
    /// Initialises every node (round 0).
    pub fn new(g: &'g Graph, program: &'p P, inputs: &[P::Input], seed: u64, mode: Mode) -> Result<Self, SimError> {
        if program.mode() != mode {
            return Err(SimError::ModeMismatch { declared: program.mode(), requested: mode });
        }
        if g.is_directed() {
            return Err(SimError::Directed);
        }
        let n = g.n();
        if inputs.len() != n {
            return Err(SimError::InputCount { expected: n, got: inputs.len() });
        }
        let mut metrics = SimMetrics::with_edges(g.m());
        metrics.in_bits = input_bits(g, program, inputs);
        let ctxs: Vec<NodeCtx<'g>> = (0..n).map(|v| NodeCtx::new(g, v)).collect();
        let states =
            (0..n).map(|v| program.init(&ctxs[v], &inputs[v], &RandomStream::node_round(seed, v, 0))).collect();
        Ok(Execution {
            g,
            program,
            seed,
            mode,
            ctxs,
            states,
            inboxes: vec![Vec::new(); n],
            sends: Vec::new(),
            round: 0,
            metrics,
        })
    }

    /// Whether every node has halted.
    pub fn all_halted(&self) -> bool {
        self.states.iter().all(|s| self.program.halted(s))
    }

    /// Rounds executed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Current node states.
    pub fn states(&self) -> &[P::State] {
        &self.states
    }

    /// Metrics so far.
    pub fn metrics(&self) -> &SimMetrics {
        &self.metrics
    }

    /// Inboxes delivered in the last executed round.
    pub fn last_inboxes(&self) -> &[Vec<(NodeId, Message)>] {
        &self.inboxes
    }

    /// Executes one round. `observe` sees every node's pre-transition state and inbox.
    pub fn step_observed(
        &mut self,
        observe: &mut dyn FnMut(NodeId, u64, &P::State, &[(NodeId, Message)]),
    ) -> Result<(), SimError> {
        self.round += 1;
        let round = self.round;
        let (g, program) = (self.g, self.program);
        for inbox in self.inboxes.iter_mut() {
            inbox.clear();
        }
        // Senders are visited in increasing id order, so every inbox ends up sender-sorted.
        for v in 0..g.n() {
            if program.halted(&self.states[v]) {
                continue;
            }
            let outbox = program.emit(&self.ctxs[v], &self.states[v], round);
            if expand_outbox(g, v, round, outbox, self.mode, &mut self.sends)? {
                self.metrics.broadcasts += 1;
            }
            for &(u, m) in &self.sends {
                let e = g.edge_between(v, u).expect("validated neighbor");
                self.metrics.edge_congestion[e] += 1;
                self.metrics.messages += 1;
                self.inboxes[u].push((v, m));
            }
        }
        for v in 0..g.n() {
            self.metrics.received += self.inboxes[v].len() as u64;
            observe(v, round, &self.states[v], &self.inboxes[v]);
            let rand = RandomStream::node_round(self.seed, v, round);
            program.transition(&self.ctxs[v], &mut self.states[v], round, &self.inboxes[v], &rand);
        }
        self.metrics.rounds = round;
        self.metrics.dilation = round;
        Ok(())
    }

    /// Executes one round.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.step_observed(&mut |_, _, _, _| {})
    }

    /// Runs until every node halts or `max_rounds` is reached.
    pub fn run_to_end(
        mut self,
        max_rounds: u64,
        observe: &mut dyn FnMut(NodeId, u64, &P::State, &[(NodeId, Message)]),
    ) -> Result<Run<P::Output>, SimError> {
        while !self.all_halted() {
            if self.round >= max_rounds {
                return Err(SimError::Timeout { max_rounds, partial: Box::new(self.metrics) });
            }
            self.step_observed(observe)?;
        }
        Ok(self.finish())
    }

    /// Outputs of the current states, with `out_bits` filled in.
    pub fn finish(self) -> Run<P::Output> {
        let outputs: Vec<P::Output> = self.states.iter().map(|s| self.program.output(s)).collect();
        let mut metrics = self.metrics;
        metrics.out_bits = output_bits(self.g, self.program, &outputs);
        Run { outputs, metrics }
    }
}

/// Runs `program` in the given mode.
pub fn run_program<P: NodeProgram>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    max_rounds: u64,
    seed: u64,
    mode: Mode,
) -> Result<Run<P::Output>, SimError> {
    Execution::new(g, program, inputs, seed, mode)?.run_to_end(max_rounds, &mut |_, _, _, _| {})
}
