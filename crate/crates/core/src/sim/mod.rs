//! Synchronous round engine for CONGEST and BCONGEST node programs.
//!
//! Round `r ≥ 1` runs in three steps for every node: `emit` produces the node's outbox
//! from its current state, all messages are delivered, and `transition` folds the
//! sender-sorted inbox into the state. A message emitted in round `r` is therefore seen
//! exactly once, by the receiver's round-`r` transition, and influences what the receiver
//! emits from round `r + 1` on. The run ends after the first round at whose end every node
//! reports [`NodeProgram::halted`]; if every node is halted right after `init`, the run has
//! zero rounds.

mod contract;
mod engine;
mod message;
mod metrics;
mod program;

pub use contract::{
    verify_aggregation_contract, AggregationContract, ContractReport, ContractViolation, ViolationKind, S_MAX_WORDS,
};
pub use engine::{input_bits, output_bits, run_bcongest, run_congest, run_program, Execution, Run, SimError};
pub use message::{field_bits, Message, PayloadError, MAX_FIELDS};
pub use metrics::{PhaseMetrics, SimMetrics, StageCost};
pub use program::{Mode, NodeCtx, NodeProgram, Outbox};
