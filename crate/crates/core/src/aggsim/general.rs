use alloc::vec::Vec;

use super::{
    down, drive, general_budget, item_tokens, learn_hierarchy, prepare_global, receive_steps, with_preprocessing,
    AggError, AggParams, AggSimulation, Knowledge, PhaseIo,
};
use crate::cluster::{packet_tokens, BsHierarchy, RouteReport, Routing};
use crate::graph::{Graph, NodeId};
use crate::sim::{AggregationContract, Message, NodeProgram, SimMetrics};

/// Simulates `program` for at most `t_a` rounds over the hierarchy `h`, aggregating with
/// `contract`. Outputs equal those of `run_bcongest(g, program, inputs, _, seed)`.
///
/// Cost: leader election, the per-level edge upcast, then `t_a` phases of
/// `⌈c₂ · n · log₂ n⌉` rounds each. Building `h` is the caller's cost.
#[allow(clippy::too_many_arguments)]
pub fn simulate_general<P, C>(
    g: &Graph,
    program: &P,
    contract: &C,
    inputs: &[P::Input],
    h: &BsHierarchy,
    t_a: u64,
    seed: u64,
    params: &AggParams,
) -> Result<AggSimulation<P::Output>, AggError>
where
    P: NodeProgram,
    P::State: PartialEq,
    C: AggregationContract + ?Sized,
{
    let global = prepare_global(g, seed)?;
    let k = learn_hierarchy(g, h)?;
    let mut pre = SimMetrics::with_edges(g.m());
    pre.append_sequential("leader", &global.metrics);
    pre.append_sequential("learn-hierarchy", &k.metrics);
    let run = run_general(g, program, contract, inputs, &k, t_a, seed, params)?;
    Ok(with_preprocessing(&pre, run))
}

/// The phases of [`simulate_general`] without preprocessing.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_general<P, C>(
    g: &Graph,
    program: &P,
    contract: &C,
    inputs: &[P::Input],
    k: &Knowledge<'_>,
    t_a: u64,
    seed: u64,
    params: &AggParams,
) -> Result<AggSimulation<P::Output>, AggError>
where
    P: NodeProgram,
    P::State: PartialEq,
    C: AggregationContract + ?Sized,
{
    let budget = general_budget(g.n(), params.c2);
    let mask = k.h.cluster_edge_mask(g);
    drive(g, program, inputs, t_a, budget, seed, params, mask, |sent, p, io| general_phase(g, k, contract, sent, p, io))
}

fn general_phase<C: AggregationContract + ?Sized>(
    g: &Graph,
    k: &Knowledge<'_>,
    contract: &C,
    sent: &[Option<Message>],
    p: u64,
    io: &mut PhaseIo,
) -> Result<Vec<(RouteReport, bool)>, AggError> {
    let h = k.h;
    // Send step: raw messages over the sender's own F edges, raw messages up to every cluster
    // of the sender, and per (receiver, cluster) aggregates down the cluster tree and across
    // the receiver's F edge.
    let mut indirect = Routing::new();
    let mut up = Routing::new();
    let mut receipts: Vec<(NodeId, NodeId)> = Vec::new();
    for (x, m) in sent.iter().enumerate() {
        let Some(m) = m else { continue };
        let tokens = item_tokens(m);
        for &(w, _) in &h.levels[h.low_level[x]].f_out[x] {
            indirect.add_copies(&[x, w], tokens);
            receipts.push((x, w));
        }
        for i in k.member_levels(x).skip(1) {
            up.add_copies(&k.paths[i][x], tokens);
        }
    }

    let mut downs = Routing::new();
    let mut across = Routing::new();
    let mut groups: Vec<(NodeId, NodeId)> = Vec::new();
    let mut input: Vec<(NodeId, Message)> = Vec::new();
    for t in 0..io.touched.len() {
        let u = io.touched[t];
        let level = h.low_level[u] - 1;
        let f = k.forest(level);
        let own = f.center(u);
        groups.clear();
        for &x in &io.heard[u] {
            if let Some(c) = f.center(x) {
                if Some(c) != own {
                    groups.push((c, x));
                }
            }
        }
        groups.sort_unstable();
        for chunk in groups.chunk_by(|a, b| a.0 == b.0) {
            let c = chunk[0].0;
            let Some(w) = k.endpoint(u, c) else { continue };
            input.clear();
            input.extend(chunk.iter().map(|&(_, x)| (x, sent[x].expect("broadcast"))));
            let words = io.deliver(contract, u, p, &input)?.expect("nonempty input");
            let path = down(&k.paths[level][w]);
            if path.len() > 1 {
                downs.add_copies(&path, packet_tokens(words + 1));
            }
            across.add_copies(&[w, u], packet_tokens(words));
        }
    }

    let (receive_up, receive_down) = receive_steps(k, contract, sent, &receipts, p, io)?;
    Ok(alloc::vec![
        (indirect.run(g), false),
        (up.run(g), false),
        (downs.run(g), false),
        (across.run(g), false),
        (receive_up.run(g), true),
        (receive_down.run(g), true),
    ])
}
