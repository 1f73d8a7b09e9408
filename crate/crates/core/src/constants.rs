//! Every tunable constant in one place.
//!
//! The asymptotic bounds leave constants open; the values below are the defaults shipped
//! with the crate and can be overridden per run (the bench crate loads them from JSON).

/// Frozen constants.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Constants {
    /// Shift rate of the exponential-shift decomposition.
    pub ldc_beta: f64,
    /// Diameter and F-degree bound of the decomposition, in multiples of `⌈log₂ n⌉`.
    pub ldc_bound_factor: u64,
    /// Attempts (first try included) for every w.h.p. property before failing.
    pub max_attempts: u32,
    /// Per-phase round budget of the cluster simulation: `c₁ · n · log₂ n`.
    pub c1: f64,
    /// Per-phase round budget of the general hierarchy simulation: `c₂ · n · log₂ n`.
    pub c2: f64,
    /// Per-phase round budget of the star simulation: `c₃ · n^{1−ε} · log₂ n`.
    pub c3: f64,
    /// F-degree bound of a hierarchy: `c · n^ε · ln n`.
    pub bs_degree_factor: f64,
    /// Round bound of the weighted APSP program: `c · (n + ⌈2 · tree depth / w_min⌉)`.
    pub apsp_round_factor: f64,
    /// Slots per global round of the random-delay BFS scheduler: `c · ⌈log₂ n⌉`.
    pub slot_factor: f64,
    /// Depth limit of the limited multi-BFS: `c_d · n^{1−ε} · log₂ n`.
    pub depth_factor: f64,
    /// Landmark sampling: `p_L = min(1, c_L · ln n · n^{ε−1})`.
    pub landmark_factor: f64,
    /// Matching phase budget `c · s / (s − i)`.
    pub matching_budget: f64,
    /// Cover membership bound `c · k · n^{1/k} · ln n`.
    pub cover_membership: f64,
    /// Cover depth bound `c · W · k`.
    pub cover_depth: f64,
    /// Simulation message bound `C · (In + Out + B) · log₂² n`.
    pub message_bound: f64,
    /// Cluster-edge rarity bound `c · κ · n^{−ε}`.
    pub rarity_factor: f64,
    /// Per-edge ensemble cluster-edge count bound `c · ln n`.
    pub ensemble_edge_factor: f64,
    /// Distinct sources received per node per round: `c · ln n`.
    pub distinct_sources_factor: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            ldc_beta: 0.5,
            ldc_bound_factor: 16,
            max_attempts: 4,
            c1: 8.0,
            c2: 8.0,
            c3: 8.0,
            bs_degree_factor: 2.0,
            apsp_round_factor: 2.0,
            slot_factor: 4.0,
            depth_factor: 4.0,
            landmark_factor: 4.0,
            matching_budget: 4.0,
            cover_membership: 4.0,
            cover_depth: 4.0,
            message_bound: 64.0,
            rarity_factor: 4.0,
            ensemble_edge_factor: 6.0,
            distinct_sources_factor: 4.0,
        }
    }
}
