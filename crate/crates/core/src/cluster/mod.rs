//! Cluster structures: rooted forests with pipelined upcast/downcast, low-diameter
//! decompositions with sparse inter-cluster edges, and Baswana-Sen style hierarchies.

mod announce;
pub mod bs;
mod forest;
pub mod global;
pub mod ldc;
pub mod routing;

pub use announce::announce;
pub use bs::{
    build_bs_hierarchy, build_bs_hierarchy_with, build_ensemble, build_ensemble_with, degree_limit, kappa_for,
    prune_hierarchy, prune_threshold, validate_cluster_edge_cases, validate_pruned, validate_radius, BsError,
    BsHierarchy, BsLevel, BsParams, BsViolation, DegreeReport, HierarchyDump, HierarchyEnsemble, LevelDump,
};
pub use forest::{ClusterForest, ForestError};
pub use ldc::{ldc_decompose, ldc_decompose_with, validate_ldc, LdcDecomposition, LdcError, LdcParams};
pub use routing::{downcast, packet_tokens, upcast, CastError, Downcast, RouteReport, Routing, Upcast};
