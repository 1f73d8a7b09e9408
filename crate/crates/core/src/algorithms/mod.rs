//! Problem solvers built on the simulations, plus sequential oracles.

pub mod apsp;
pub mod cover;
pub mod matching;
pub mod oracles;
pub mod programs;

pub use apsp::{
    apsp_unweighted_tradeoff, apsp_weighted_msgopt, bfs_certificate, landmark_phase, multi_bfs_full, multi_bfs_limited,
    ApspError, ApspRun, LandmarkRun, MultiBfsRun, Regime,
};
pub use cover::{neighborhood_cover, validate_cover, CoverError, CoverRun, CoverStats, CoverTree, CoverViolation};
pub use matching::{bipartite_max_matching, MatchingError, MatchingPhase, MatchingRun};
pub use oracles::{bfs_apsp, dijkstra_apsp, hopcroft_karp, is_matching, DistanceMatrix, MatrixViolation};
