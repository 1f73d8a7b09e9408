use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::EdgeId;

/// Per-phase counters reported by the cluster simulations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseMetrics {
    /// Phase index, starting at 1.
    pub p: u64,
    /// Messages of the sending step.
    pub messages_step1: u64,
    /// Messages of the receiving step.
    pub messages_step2: u64,
    /// Number of simulated nodes broadcasting in the phase.
    pub broadcasters: u64,
    /// Rounds spent on the phase.
    pub rounds: u64,
}

/// Cost of a named stage (preprocessing, leader election, ...).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageCost {
    /// Stage name.
    pub stage: String,
    /// Rounds charged.
    pub rounds: u64,
    /// Messages charged.
    pub messages: u64,
}

/// Exact cost of an execution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimMetrics {
    /// Round complexity.
    pub rounds: u64,
    /// Message complexity.
    pub messages: u64,
    /// Broadcast complexity.
    pub broadcasts: u64,
    /// Messages per edge, indexed by edge id.
    pub edge_congestion: Vec<u64>,
    /// Dilation: rounds of the longest constituent execution.
    pub dilation: u64,
    /// Input size in bits, graph and ids included.
    pub in_bits: u64,
    /// Output size in bits.
    pub out_bits: u64,
    /// Messages delivered into some inbox or buffer.
    pub received: u64,
    /// Per-phase breakdown, when the execution has phases.
    pub per_phase: Vec<PhaseMetrics>,
    /// Cost split by named stage.
    pub stages: Vec<StageCost>,
}

impl SimMetrics {
    /// Zeroed metrics for a graph with `m` edges.
    pub fn with_edges(m: usize) -> Self {
        SimMetrics { edge_congestion: vec![0; m], ..Default::default() }
    }

    /// Records `count` messages over edge `e`.
    pub fn charge_edge(&mut self, e: EdgeId, count: u64) {
        self.edge_congestion[e] += count;
        self.messages += count;
        self.received += count;
    }

    /// Largest per-edge count.
    pub fn max_edge_congestion(&self) -> u64 {
        self.edge_congestion.iter().copied().max().unwrap_or(0)
    }

    /// Sum of per-edge counts; equals `messages` for consistent metrics.
    pub fn congestion_total(&self) -> u64 {
        self.edge_congestion.iter().sum()
    }

    /// Appends `other` as a stage that runs after the current execution.
    pub fn append_sequential(&mut self, stage: &str, other: &SimMetrics) {
        if self.edge_congestion.len() < other.edge_congestion.len() {
            self.edge_congestion.resize(other.edge_congestion.len(), 0);
        }
        for (a, b) in self.edge_congestion.iter_mut().zip(&other.edge_congestion) {
            *a += *b;
        }
        self.rounds += other.rounds;
        self.messages += other.messages;
        self.broadcasts += other.broadcasts;
        self.received += other.received;
        self.dilation = self.dilation.max(other.dilation);
        self.stages.push(StageCost { stage: String::from(stage), rounds: other.rounds, messages: other.messages });
    }

    /// Cost of a named stage, summed over repeated entries.
    pub fn stage(&self, name: &str) -> StageCost {
        let mut out = StageCost { stage: String::from(name), rounds: 0, messages: 0 };
        for s in self.stages.iter().filter(|s| s.stage == name) {
            out.rounds += s.rounds;
            out.messages += s.messages;
        }
        out
    }

    /// Checks `messages = Σ congestion` and `received = messages`.
    pub fn is_consistent(&self) -> bool {
        self.messages == self.congestion_total() && self.received == self.messages
    }
}
