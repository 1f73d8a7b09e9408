//! Node programs used as simulation workloads and as building blocks of the solvers.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::NodeId;
use crate::random::RandomStream;
use crate::sim::{AggregationContract, Message, Mode, NodeCtx, NodeProgram, Outbox};

/// Message tag of BFS waves.
pub const TAG_BFS: u8 = 1;
/// Message tag of flooded tokens.
pub const TAG_TOKEN: u8 = 2;
/// Message tag of Bellman-Ford updates.
pub const TAG_BF: u8 = 3;

/// BCONGEST breadth-first search from the nodes whose input is `true`.
///
/// Every reached node broadcasts its distance once. With a depth limit, nodes at the limit
/// stay silent, so exactly the nodes within `limit` hops are reached.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bfs {
    /// Maximum depth explored, if any.
    pub depth_limit: Option<u64>,
}

/// State of [`Bfs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BfsState {
    /// Hop distance to the nearest root, once known.
    pub dist: Option<u64>,
    /// Smallest-id neighbor among those at distance `dist - 1`.
    pub parent: Option<NodeId>,
    /// Whether the node has already broadcast (or never will).
    pub done: bool,
}

/// Output of [`Bfs`]: `(distance, parent)`.
pub type BfsOutput = (Option<u64>, Option<NodeId>);

impl Bfs {
    fn wants_to_send(&self, s: &BfsState) -> bool {
        match (s.dist, self.depth_limit) {
            (None, _) => false,
            (Some(d), Some(l)) => d < l && !s.done,
            (Some(_), None) => !s.done,
        }
    }
}

impl NodeProgram for Bfs {
    type Input = bool;
    type State = BfsState;
    type Output = BfsOutput;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, _ctx: &NodeCtx<'_>, root: &bool, _rand: &RandomStream) -> BfsState {
        BfsState { dist: if *root { Some(0) } else { None }, parent: None, done: false }
    }

    fn emit(&self, _ctx: &NodeCtx<'_>, s: &BfsState, _round: u64) -> Outbox {
        match s.dist {
            Some(d) if self.wants_to_send(s) => Outbox::Broadcast(Message::new(TAG_BFS, &[d])),
            _ => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        _ctx: &NodeCtx<'_>,
        s: &mut BfsState,
        _round: u64,
        inbox: &[(NodeId, Message)],
        _rand: &RandomStream,
    ) {
        if s.dist.is_some() {
            s.done = true;
            return;
        }
        let best = inbox.iter().filter(|(_, m)| m.tag() == TAG_BFS).map(|&(from, m)| (m.field(0), from)).min();
        if let Some((d, from)) = best {
            s.dist = Some(d + 1);
            s.parent = Some(from);
            s.done = !self.wants_to_send(s);
        }
    }

    fn halted(&self, s: &BfsState) -> bool {
        !self.wants_to_send(s)
    }

    fn output(&self, s: &BfsState) -> BfsOutput {
        (s.dist, s.parent)
    }

    fn output_words(&self, _o: &BfsOutput) -> usize {
        2
    }
}

/// Aggregation for a single BFS: keep the message with the smallest `(distance, sender)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MinAggregation;

impl AggregationContract for MinAggregation {
    fn aggregate(&self, _node: NodeId, _round: u64, msgs: &[(NodeId, Message)]) -> Vec<(NodeId, Message)> {
        msgs.iter().min_by_key(|&&(from, m)| (m.fields().first().copied(), from)).into_iter().copied().collect()
    }
}

/// Token flooding from the nodes whose input is `true`.
///
/// In BCONGEST mode a node broadcasts the token once after first receiving it. In CONGEST
/// mode it forwards the token to every neighbor except the ones it received it from.
#[derive(Clone, Copy, Debug)]
pub struct Flood {
    /// Communication model.
    pub mode: Mode,
}

/// State of [`Flood`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FloodState {
    /// Round in which the token arrived (0 for sources).
    pub got: Option<u64>,
    /// Neighbors the token arrived from.
    pub from: Vec<NodeId>,
    /// Whether the node has forwarded.
    pub done: bool,
}

impl NodeProgram for Flood {
    type Input = bool;
    type State = FloodState;
    type Output = Option<u64>;

    fn mode(&self) -> Mode {
        self.mode
    }

    fn init(&self, _ctx: &NodeCtx<'_>, source: &bool, _rand: &RandomStream) -> FloodState {
        FloodState { got: if *source { Some(0) } else { None }, from: Vec::new(), done: false }
    }

    fn emit(&self, ctx: &NodeCtx<'_>, s: &FloodState, _round: u64) -> Outbox {
        if s.got.is_none() || s.done {
            return Outbox::Silent;
        }
        let token = Message::new(TAG_TOKEN, &[]);
        match self.mode {
            Mode::Bcongest => Outbox::Broadcast(token),
            Mode::Congest => Outbox::PerNeighbor(
                ctx.neighbors().iter().filter(|(u, _)| !s.from.contains(u)).map(|&(u, _)| (u, token)).collect(),
            ),
        }
    }

    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut FloodState,
        round: u64,
        inbox: &[(NodeId, Message)],
        _rand: &RandomStream,
    ) {
        if s.got.is_some() {
            s.done = true;
            return;
        }
        if !inbox.is_empty() {
            s.got = Some(round);
            s.from = inbox.iter().map(|&(u, _)| u).collect();
            // Nothing left to forward to in CONGEST mode.
            if self.mode == Mode::Congest && s.from.len() == ctx.degree() {
                s.done = true;
            }
        }
    }

    fn halted(&self, s: &FloodState) -> bool {
        s.got.is_none() || s.done
    }

    fn output(&self, s: &FloodState) -> Option<u64> {
        s.got
    }
}

/// Pipelined Bellman-Ford for all sources (BCONGEST).
///
/// Each node keeps an estimate per source and a queue of sources whose estimate improved
/// since it was last announced. Each round it broadcasts one queued `(source, estimate)`
/// pair, smallest estimate first. Estimates are split over three fields so that distances up
/// to `2^(3·(⌈log₂ n⌉+8))` fit the payload budget.
#[derive(Clone, Copy, Debug, Default)]
pub struct BellmanFord;

/// State of [`BellmanFord`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BellmanFordState {
    /// Estimate per source (`u64::MAX` when unknown).
    pub est: Vec<u64>,
    /// Improved entries not yet announced, ordered by `(estimate, source)`.
    pub pending: BTreeSet<(u64, NodeId)>,
}

const BF_PARTS: usize = 3;

impl NodeProgram for BellmanFord {
    type Input = ();
    type State = BellmanFordState;
    type Output = Vec<u64>;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, _input: &(), _rand: &RandomStream) -> BellmanFordState {
        let mut est = vec![u64::MAX; ctx.n()];
        est[ctx.id()] = 0;
        let mut pending = BTreeSet::new();
        pending.insert((0, ctx.id()));
        BellmanFordState { est, pending }
    }

    fn emit(&self, ctx: &NodeCtx<'_>, s: &BellmanFordState, _round: u64) -> Outbox {
        match s.pending.first() {
            Some(&(d, src)) => {
                let mut fields = vec![src as u64];
                fields.extend(Message::split_wide(d, ctx.n(), BF_PARTS));
                Outbox::Broadcast(Message::new(TAG_BF, &fields))
            }
            None => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut BellmanFordState,
        _round: u64,
        inbox: &[(NodeId, Message)],
        _rand: &RandomStream,
    ) {
        s.pending.pop_first();
        for &(from, m) in inbox {
            if m.tag() != TAG_BF {
                continue;
            }
            let src = m.field(0) as usize;
            let d = Message::join_wide(&m.fields()[1..], ctx.n());
            let w = ctx.weight_to(from).unwrap_or(1);
            let cand = d.saturating_add(w);
            if cand < s.est[src] {
                if s.est[src] != u64::MAX {
                    s.pending.remove(&(s.est[src], src));
                }
                s.est[src] = cand;
                s.pending.insert((cand, src));
            }
        }
    }

    fn halted(&self, s: &BellmanFordState) -> bool {
        s.pending.is_empty()
    }

    fn output(&self, s: &BellmanFordState) -> Vec<u64> {
        s.est.clone()
    }

    fn output_words(&self, o: &Vec<u64>) -> usize {
        o.len() * BF_PARTS
    }
}
