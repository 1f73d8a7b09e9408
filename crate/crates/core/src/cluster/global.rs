//! Global primitives over a BFS tree: leader election, counting, renaming and shared randomness.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use super::forest::{ClusterForest, ForestError};
use super::routing::{tree_echo_cost, tree_flood_cost};
use crate::graph::{Graph, NodeId};
use crate::random::RandomStream;
use crate::sim::{field_bits, run_bcongest, Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};

const TAG_LEADER: u8 = 20;

/// Failures of the global primitives.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GlobalError {
    /// The communication graph is not connected.
    #[error("graph has {0} connected components; a connected graph is required")]
    Disconnected(usize),
    /// Engine failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// The computed tree is malformed.
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// Min-rank flooding: every node adopts the smallest `(rank, id)` it has heard of, together with
/// its hop distance, and rebroadcasts on every improvement. Ranks are random so the expected
/// number of improvements per node is logarithmic.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeaderBfs;

/// State of [`LeaderBfs`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeaderState {
    best: (u64, NodeId),
    dist: u64,
    parent: Option<NodeId>,
    pending: bool,
}

impl NodeProgram for LeaderBfs {
    type Input = ();
    type State = LeaderState;
    type Output = (NodeId, u64, Option<NodeId>);

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, _: &(), rand: &RandomStream) -> LeaderState {
        let bits = 2 * field_bits(ctx.n());
        let rank = if bits >= 64 { rand.rng().r#gen() } else { rand.rng().gen_range(0..1u64 << bits) };
        LeaderState { best: (rank, ctx.id()), dist: 0, parent: None, pending: true }
    }

    fn emit(&self, ctx: &NodeCtx<'_>, s: &LeaderState, _round: u64) -> Outbox {
        if !s.pending {
            return Outbox::Silent;
        }
        let r = Message::split_wide(s.best.0, ctx.n(), 2);
        Outbox::Broadcast(Message::new(TAG_LEADER, &[r[0], r[1], s.best.1 as u64, s.dist]))
    }

    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut LeaderState,
        _round: u64,
        inbox: &[(NodeId, Message)],
        _: &RandomStream,
    ) {
        s.pending = false;
        let best = inbox
            .iter()
            .filter(|(_, m)| m.tag() == TAG_LEADER)
            .map(|&(from, m)| {
                ((Message::join_wide(&m.fields()[..2], ctx.n()), m.field(2) as usize), m.field(3) + 1, from)
            })
            .min();
        if let Some((key, d, from)) = best {
            if key < s.best || (key == s.best && d < s.dist) {
                s.best = key;
                s.dist = d;
                s.parent = Some(from);
                s.pending = true;
            }
        }
    }

    fn halted(&self, s: &LeaderState) -> bool {
        !s.pending
    }

    fn output(&self, s: &LeaderState) -> (NodeId, u64, Option<NodeId>) {
        (s.best.1, s.dist, s.parent)
    }

    fn output_words(&self, _: &(NodeId, u64, Option<NodeId>)) -> usize {
        3
    }
}

/// A leader with a BFS tree rooted at it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalTree {
    /// Elected node.
    pub leader: NodeId,
    /// BFS tree as a single-cluster forest centered at the leader.
    pub tree: ClusterForest,
    /// Cost of election and tree construction.
    pub metrics: SimMetrics,
}

/// Elects a leader and builds a BFS tree rooted at it.
pub fn elect_leader(g: &Graph, seed: u64) -> Result<GlobalTree, GlobalError> {
    let comps = g.component_count();
    if comps != 1 {
        return Err(GlobalError::Disconnected(comps));
    }
    let n = g.n();
    let seed = RandomStream::new(seed).derive("leader", 0).seed_u64();
    let run = run_bcongest(g, &LeaderBfs, &vec![(); n], 4 * n as u64 + 16, seed)?;
    let leader = run.outputs[0].0;
    let parents: Vec<Option<NodeId>> = run.outputs.iter().map(|o| o.2).collect();
    let tree = ClusterForest::from_parents(g, parents, &vec![true; n])?;
    Ok(GlobalTree { leader, tree, metrics: run.metrics })
}

/// Convergecast of subtree sizes and broadcast of `n` over the tree.
pub fn count_nodes(g: &Graph, t: &GlobalTree) -> (usize, SimMetrics) {
    (g.n(), tree_echo_cost(g, &t.tree))
}

/// Renaming to `[0, n)` by subtree intervals. Ids are already dense, so only the cost is real.
pub fn rename(g: &Graph, t: &GlobalTree) -> SimMetrics {
    tree_echo_cost(g, &t.tree)
}

/// A string of `words` random words generated by the leader and pipelined to every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedRandomness {
    stream: RandomStream,
    words: usize,
    /// Cost of distributing the string.
    pub metrics: SimMetrics,
}

impl SharedRandomness {
    /// Generates and distributes the string. `label` separates independent invocations.
    pub fn distribute(g: &Graph, t: &GlobalTree, seed: u64, label: u64, words: usize) -> Self {
        let stream = RandomStream::new(seed).derive("shared", label);
        SharedRandomness { stream, words, metrics: tree_flood_cost(g, &t.tree, words as u64) }
    }

    /// Length in words.
    pub fn words(&self) -> usize {
        self.words
    }

    /// Segment `i`, uniform in `[lo, hi]`.
    pub fn segment_in(&self, i: usize, lo: u64, hi: u64) -> u64 {
        assert!(i < self.words, "segment {i} out of range");
        self.stream.derive("segment", i as u64).rng().gen_range(lo..=hi)
    }
}

/// Leader election, BFS tree and node count, with their combined cost.
pub fn setup_global(g: &Graph, seed: u64) -> Result<GlobalTree, GlobalError> {
    let mut t = elect_leader(g, seed)?;
    let (_, count) = count_nodes(g, &t);
    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("leader-bfs", &t.metrics);
    metrics.append_sequential("count", &count);
    t.metrics = metrics;
    Ok(t)
}
