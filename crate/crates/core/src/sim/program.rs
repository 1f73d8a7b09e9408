use alloc::vec::Vec;

use super::Message;
use crate::graph::{EdgeId, Graph, NodeId};
use crate::random::RandomStream;

/// Communication model a program is written for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// Distinct messages per neighbor.
    Congest,
    /// Either silent or the same message to every neighbor.
    Bcongest,
}

/// What a node sends in one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outbox {
    /// Nothing.
    Silent,
    /// One message to every neighbor.
    Broadcast(Message),
    /// Individual messages, at most one per neighbor (CONGEST only).
    PerNeighbor(Vec<(NodeId, Message)>),
}

/// Local view of a node: its id and incident edges. This is exactly the knowledge a
/// node has of the network at the start of an execution.
#[derive(Clone, Copy, Debug)]
pub struct NodeCtx<'a> {
    id: NodeId,
    graph: &'a Graph,
}

impl<'a> NodeCtx<'a> {
    /// View of node `id` in `graph`.
    pub fn new(graph: &'a Graph, id: NodeId) -> Self {
        NodeCtx { id, graph }
    }

    /// This node.
    pub fn id(&self) -> NodeId {
        self.id
    }

    /// Network size.
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Sorted neighbors with incident edge ids.
    pub fn neighbors(&self) -> &'a [(NodeId, EdgeId)] {
        self.graph.neighbors(self.id)
    }

    /// Number of incident edges.
    pub fn degree(&self) -> usize {
        self.graph.degree(self.id)
    }

    /// Weight of the edge to neighbor `u` (1 when unweighted).
    pub fn weight_to(&self, u: NodeId) -> Option<u64> {
        self.graph.edge_between(self.id, u).map(|e| self.graph.weight(e))
    }

    /// Whether the incident edges carry weights.
    pub fn weighted(&self) -> bool {
        self.graph.is_weighted()
    }
}

/// A deterministic per-node program. The same program object drives every node;
/// per-node behaviour comes from the [`NodeCtx`], the input and the node's random stream.
///
/// `transition` and `emit` must be deterministic functions of their arguments: cluster
/// centers re-execute member nodes remotely and must reach identical states.
pub trait NodeProgram {
    /// Per-node input record.
    type Input: Clone;
    /// Per-node state.
    type State: Clone;
    /// Per-node output record.
    type Output: Clone;

    /// Model the program is written for.
    fn mode(&self) -> Mode;

    /// Initial state. `rand` is the node's stream for round 0.
    fn init(&self, ctx: &NodeCtx<'_>, input: &Self::Input, rand: &RandomStream) -> Self::State;

    /// Outgoing messages for `round`, computed from the state left by the previous transition.
    fn emit(&self, ctx: &NodeCtx<'_>, state: &Self::State, round: u64) -> Outbox;

    /// Folds the round-`round` inbox (sorted by sender) into the state.
    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        state: &mut Self::State,
        round: u64,
        inbox: &[(NodeId, Message)],
        rand: &RandomStream,
    );

    /// Local termination. A halted node is not asked to emit; it still receives.
    fn halted(&self, state: &Self::State) -> bool;

    /// Final output.
    fn output(&self, state: &Self::State) -> Self::Output;

    /// Size of an input record in words (for the `In` measure).
    fn input_words(&self, _input: &Self::Input) -> usize {
        1
    }

    /// Size of an output record in words (for the `Out` measure).
    fn output_words(&self, _output: &Self::Output) -> usize {
        1
    }
}
