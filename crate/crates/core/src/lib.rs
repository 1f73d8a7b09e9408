//! Deterministic simulator for the CONGEST and BCONGEST message-passing models.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] and [`random`]: graphs, generators and seeded random streams.
//! * [`sim`]: the synchronous round engine, node programs and exact cost accounting.
//! * [`cluster`]: cluster forests, pipelined upcast/downcast, low-diameter
//!   decompositions and Baswana-Sen style hierarchies.
//! * [`bcsim`]: message-efficient re-execution of BCONGEST programs inside clusters.
//! * [`aggsim`]: simulations of aggregation-based programs over hierarchies, random-delay
//!   BFS scheduling and congestion smoothing over hierarchy ensembles.
//! * [`algorithms`]: APSP, bipartite matching and neighborhood covers built on the above,
//!   plus sequential oracles.
//!
//! Everything is `no_std` compatible (with `alloc`); the `std` feature is on by default.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod aggsim;
pub mod algorithms;
pub mod bcsim;
pub mod cluster;
pub mod constants;
pub mod graph;
pub mod math;
pub mod random;
pub mod sim;

pub use graph::{Edge, EdgeId, Graph, GraphError, GraphKind, NodeId};
pub use random::RandomStream;
pub use sim::{Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};
