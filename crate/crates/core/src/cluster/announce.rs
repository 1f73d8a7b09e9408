use alloc::vec::Vec;

use crate::graph::{Graph, NodeId};
use crate::random::RandomStream;
use crate::sim::{run_bcongest, Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};

/// One round in which some nodes broadcast a fixed message.
struct Announce;

impl NodeProgram for Announce {
    type Input = Option<Message>;
    type State = (Option<Message>, bool, Vec<(NodeId, Message)>);
    type Output = Vec<(NodeId, Message)>;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, _: &NodeCtx<'_>, input: &Option<Message>, _: &RandomStream) -> Self::State {
        (*input, input.is_none(), Vec::new())
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &Self::State, _: u64) -> Outbox {
        s.0.map_or(Outbox::Silent, Outbox::Broadcast)
    }

    fn transition(&self, _: &NodeCtx<'_>, s: &mut Self::State, _: u64, inbox: &[(NodeId, Message)], _: &RandomStream) {
        s.1 = true;
        s.2.extend_from_slice(inbox);
    }

    fn halted(&self, s: &Self::State) -> bool {
        s.1
    }

    fn output(&self, s: &Self::State) -> Vec<(NodeId, Message)> {
        s.2.clone()
    }
}

/// Every node with `Some(message)` broadcasts it once; returns what each node heard.
pub fn announce(
    g: &Graph,
    msgs: &[Option<Message>],
    seed: u64,
) -> Result<(Vec<Vec<(NodeId, Message)>>, SimMetrics), SimError> {
    let run = run_bcongest(g, &Announce, msgs, 1, seed)?;
    Ok((run.outputs, run.metrics))
}
