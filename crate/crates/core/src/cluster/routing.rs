//! Store-and-forward routing of tokens along fixed paths, and the upcast/downcast primitives.
//!
//! Every directed edge forwards at most one token per round. Tokens waiting on the same
//! directed edge leave in order of arrival at the queue, ties by token index. A token that
//! starts at node `path[0]` crosses its first edge in round 1 at the earliest.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::forest::ClusterForest;
use crate::graph::{EdgeId, Graph, NodeId};
use crate::sim::{Message, SimMetrics};

/// A batch of tokens, each with its own path.
#[derive(Clone, Debug, Default)]
pub struct Routing {
    nodes: Vec<NodeId>,
    offsets: Vec<usize>,
}

/// Cost of a routed batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteReport {
    /// Round in which the last token arrived (0 if nothing moved).
    pub rounds: u64,
    /// Total hops.
    pub messages: u64,
    /// Hops per undirected edge, for the edges that were used, ascending by edge id.
    pub congestion: Vec<(EdgeId, u64)>,
    /// Arrival round per token.
    pub arrivals: Vec<u64>,
}

impl RouteReport {
    /// The report as metrics over a graph with `m` edges.
    pub fn to_metrics(&self, m: usize) -> SimMetrics {
        let mut out = SimMetrics::with_edges(m);
        self.charge_into(&mut out);
        out.rounds = self.rounds;
        out.dilation = self.rounds;
        out
    }

    /// Adds messages and per-edge congestion (not rounds) to `metrics`.
    pub fn charge_into(&self, metrics: &mut SimMetrics) {
        for &(e, c) in &self.congestion {
            metrics.charge_edge(e, c);
        }
    }
}

impl Routing {
    /// Empty batch.
    pub fn new() -> Self {
        Routing { nodes: Vec::new(), offsets: vec![0] }
    }

    /// Adds a token following `path` (consecutive nodes must be adjacent). Returns its index.
    pub fn add_path<I: IntoIterator<Item = NodeId>>(&mut self, path: I) -> usize {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.nodes.extend(path);
        self.offsets.push(self.nodes.len());
        self.offsets.len() - 2
    }

    /// Adds `copies` tokens along the same path.
    pub fn add_copies(&mut self, path: &[NodeId], copies: usize) {
        for _ in 0..copies {
            self.add_path(path.iter().copied());
        }
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Whether there are no tokens.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self, t: usize) -> core::ops::Range<usize> {
        self.offsets[t]..self.offsets[t + 1]
    }

    /// Total hops over all tokens.
    pub fn total_hops(&self) -> u64 {
        (0..self.len()).map(|t| self.range(t).len().saturating_sub(1) as u64).sum()
    }

    /// Simulates the batch to completion.
    ///
    /// # Panics
    /// If a path uses a pair of nodes that is not an edge of `g`.
    pub fn run(&self, g: &Graph) -> RouteReport {
        let tokens = self.len();
        // Directed edge of every hop, stored at the index of the hop's tail.
        let mut hop = vec![usize::MAX; self.nodes.len()];
        let mut used: Vec<usize> = Vec::new();
        for t in 0..tokens {
            let r = self.range(t);
            for i in r.start..r.end.saturating_sub(1) {
                let (a, b) = (self.nodes[i], self.nodes[i + 1]);
                let e = g.edge_between(a, b).unwrap_or_else(|| panic!("routing over non-edge ({a}, {b})"));
                hop[i] = 2 * e + usize::from(a > b);
                used.push(hop[i]);
            }
        }
        used.sort_unstable();
        used.dedup();
        let local = |d: usize| used.binary_search(&d).expect("known edge");
        for h in hop.iter_mut().filter(|h| **h != usize::MAX) {
            *h = local(*h);
        }
        let mut queues: Vec<VecDeque<u32>> = vec![VecDeque::new(); used.len()];
        let mut load = vec![0u64; used.len()];
        let mut pos: Vec<usize> = (0..tokens).map(|t| self.offsets[t]).collect();
        let mut arrivals = vec![0u64; tokens];
        let mut active: Vec<usize> = Vec::new();
        let mut is_active = vec![false; used.len()];
        for t in 0..tokens {
            let r = self.range(t);
            if r.len() >= 2 {
                let d = hop[r.start];
                queues[d].push_back(t as u32);
                if !is_active[d] {
                    is_active[d] = true;
                    active.push(d);
                }
            }
        }
        let mut round = 0u64;
        let mut messages = 0u64;
        let mut last = 0u64;
        let mut moved: Vec<(u32, usize)> = Vec::new();
        while !active.is_empty() {
            round += 1;
            moved.clear();
            for &d in &active {
                let t = queues[d].pop_front().expect("active queue is non-empty") as usize;
                messages += 1;
                load[d] += 1;
                pos[t] += 1;
                if pos[t] + 1 == self.offsets[t + 1] {
                    arrivals[t] = round;
                    last = round;
                } else {
                    moved.push((t as u32, hop[pos[t]]));
                }
            }
            let mut next = Vec::with_capacity(active.len() + moved.len());
            for &d in &active {
                if queues[d].is_empty() {
                    is_active[d] = false;
                } else {
                    next.push(d);
                }
            }
            moved.sort_unstable();
            for &(t, d) in &moved {
                queues[d].push_back(t);
                if !is_active[d] {
                    is_active[d] = true;
                    next.push(d);
                }
            }
            active = next;
        }
        let mut congestion: Vec<(EdgeId, u64)> = Vec::new();
        for (i, &d) in used.iter().enumerate() {
            match congestion.last_mut() {
                Some((e, c)) if *e == d / 2 => *c += load[i],
                _ => congestion.push((d / 2, load[i])),
            }
        }
        RouteReport { rounds: last, messages, congestion, arrivals }
    }
}

/// Errors of the cluster primitives.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CastError {
    /// Upcast input from a node outside the forest.
    #[error("node {0} is not in any cluster")]
    NotInForest(NodeId),
    /// Downcast destination not in the sender's cluster.
    #[error("destination {dest} is not in the cluster of center {center}")]
    DestinationOutside {
        /// Sending center.
        center: NodeId,
        /// Destination.
        dest: NodeId,
    },
    /// Downcast from a node that is not a center.
    #[error("node {0} is not a center")]
    NotACenter(NodeId),
}

/// Result of an upcast: per center, the collected `(origin, word)` pairs in origin order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Upcast {
    /// Indexed by node; empty except at centers.
    pub collected: Vec<Vec<(NodeId, u64)>>,
    /// Cost.
    pub metrics: SimMetrics,
}

/// Every member sends its words, one message per word, up its cluster tree.
pub fn upcast(g: &Graph, forest: &ClusterForest, inputs: &[Vec<u64>]) -> Result<Upcast, CastError> {
    let mut routing = Routing::new();
    let mut collected = vec![Vec::new(); g.n()];
    for (v, words) in inputs.iter().enumerate() {
        if words.is_empty() {
            continue;
        }
        let c = forest.center(v).ok_or(CastError::NotInForest(v))?;
        let path = forest.path_to_center(v);
        for &w in words {
            routing.add_path(path.iter().copied());
            collected[c].push((v, w));
        }
    }
    let report = routing.run(g);
    Ok(Upcast { collected, metrics: report.to_metrics(g.m()) })
}

/// Result of a downcast: messages delivered per destination, in submission order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Downcast {
    /// Indexed by node.
    pub delivered: Vec<Vec<Message>>,
    /// Cost.
    pub metrics: SimMetrics,
}

/// Centers send each `(center, destination, message)` down the cluster tree.
pub fn downcast(g: &Graph, forest: &ClusterForest, sends: &[(NodeId, NodeId, Message)]) -> Result<Downcast, CastError> {
    let mut routing = Routing::new();
    let mut delivered = vec![Vec::new(); g.n()];
    for &(c, dest, m) in sends {
        if !forest.is_center(c) {
            return Err(CastError::NotACenter(c));
        }
        if forest.center(dest) != Some(c) {
            return Err(CastError::DestinationOutside { center: c, dest });
        }
        let mut path = forest.path_to_center(dest);
        path.reverse();
        routing.add_path(path);
        delivered[dest].push(m);
    }
    let report = routing.run(g);
    Ok(Downcast { delivered, metrics: report.to_metrics(g.m()) })
}

/// Cost of a convergecast followed by a broadcast of one word over a spanning tree:
/// every tree edge carries one message each way.
pub fn tree_echo_cost(g: &Graph, tree: &ClusterForest) -> SimMetrics {
    let mut m = SimMetrics::with_edges(g.m());
    for e in tree.tree_edges(g) {
        m.charge_edge(e, 2);
    }
    m.rounds = 2 * tree.max_depth() as u64;
    m.dilation = m.rounds;
    m
}

/// Cost of pipelining `words` messages from every center to all of its members.
pub fn tree_flood_cost(g: &Graph, tree: &ClusterForest, words: u64) -> SimMetrics {
    let mut m = SimMetrics::with_edges(g.m());
    if words == 0 {
        return m;
    }
    for e in tree.tree_edges(g) {
        m.charge_edge(e, words);
    }
    let depth = tree.max_depth() as u64;
    m.rounds = if depth == 0 { 0 } else { words + depth - 1 };
    m.dilation = m.rounds;
    m
}

/// Messages needed to carry an encoded packet of `words` words (four words per message).
pub fn packet_tokens(words: usize) -> usize {
    words.div_ceil(4).max(1)
}
