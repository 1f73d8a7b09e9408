use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    down, drive, item_tokens, learn_hierarchy, prepare_global, receive_steps, star_budget, with_preprocessing,
    AggError, AggParams, AggSimulation, Knowledge, PhaseIo,
};
use crate::cluster::{packet_tokens, BsHierarchy, RouteReport, Routing};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::sim::{AggregationContract, Message, NodeProgram, SimMetrics};

/// Greedy maximal matching over `edges` taken in the given order; `(left, right, edge)`
/// triples, a node may appear on one side only.
pub fn greedy_maximal_matching(edges: &[(NodeId, NodeId, EdgeId)]) -> Vec<(NodeId, NodeId, EdgeId)> {
    let mut used_left: Vec<NodeId> = Vec::new();
    let mut used_right: Vec<NodeId> = Vec::new();
    let mut out = Vec::new();
    for &(x, y, e) in edges {
        if used_left.contains(&x) || used_right.contains(&y) {
            continue;
        }
        used_left.push(x);
        used_right.push(y);
        out.push((x, y, e));
    }
    out
}

/// Whether no edge of `edges` has both endpoints unmatched in `matching`.
pub fn is_maximal_matching(edges: &[(NodeId, NodeId, EdgeId)], matching: &[(NodeId, NodeId, EdgeId)]) -> bool {
    let left: Vec<NodeId> = matching.iter().map(|m| m.0).collect();
    let right: Vec<NodeId> = matching.iter().map(|m| m.1).collect();
    let distinct = |v: &[NodeId]| {
        let mut s = v.to_vec();
        s.sort_unstable();
        s.dedup();
        s.len() == v.len()
    };
    distinct(&left)
        && distinct(&right)
        && matching.iter().all(|m| edges.contains(m))
        && edges.iter().all(|&(x, y, _)| left.contains(&x) || right.contains(&y))
}

/// Simulates `program` for at most `t_a` rounds over a hierarchy with `κ ≤ 2`.
///
/// Nodes of `L_1` broadcast directly. Broadcasters in a star send to their center, which
/// serves every neighboring star through a maximal matching between its broadcasting members
/// and their neighbors in that star: each matched broadcaster forwards its own message plus
/// the aggregate for its partner. Neighbors in `L_1` get one aggregate over a single edge.
/// Each phase takes `⌈c₃ · n^{1−ε} · log₂ n⌉` rounds.
#[allow(clippy::too_many_arguments)]
pub fn simulate_star<P, C>(
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
    if h.kappa > 2 {
        return Err(AggError::NotStar(h.kappa));
    }
    let global = prepare_global(g, seed)?;
    let k = learn_hierarchy(g, h)?;
    let mut pre = SimMetrics::with_edges(g.m());
    pre.append_sequential("leader", &global.metrics);
    pre.append_sequential("learn-hierarchy", &k.metrics);
    let run = run_star(g, program, contract, inputs, &k, t_a, seed, params)?;
    Ok(with_preprocessing(&pre, run))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_star<P, C>(
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
    if k.h.kappa > 2 {
        return Err(AggError::NotStar(k.h.kappa));
    }
    let budget = star_budget(g.n(), k.h.epsilon, params.c3);
    let mask = k.h.cluster_edge_mask(g);
    drive(g, program, inputs, t_a, budget, seed, params, mask, |sent, p, io| star_phase(g, k, contract, sent, p, io))
}

fn star_phase<C: AggregationContract + ?Sized>(
    g: &Graph,
    k: &Knowledge<'_>,
    contract: &C,
    sent: &[Option<Message>],
    p: u64,
    io: &mut PhaseIo,
) -> Result<Vec<(RouteReport, bool)>, AggError> {
    let n = g.n();
    let stars = if k.levels() > 1 { Some(k.forest(1)) } else { None };
    let star_of = |v: NodeId| stars.and_then(|f| f.center(v));

    let mut direct = Routing::new();
    let mut up = Routing::new();
    // Per center: (target, broadcaster, edge) over edges leaving the star.
    let mut targets: BTreeMap<NodeId, Vec<(NodeId, NodeId, EdgeId)>> = BTreeMap::new();
    for (x, m) in sent.iter().enumerate() {
        let Some(m) = m else { continue };
        match star_of(x) {
            None => {
                for &(u, _) in g.neighbors(x) {
                    direct.add_path([x, u]);
                    io.deliver_raw(u, x, *m);
                }
            }
            Some(c) => {
                let path = &k.paths[1][x];
                if path.len() > 1 {
                    up.add_path(path.iter().copied());
                }
                let list = targets.entry(c).or_default();
                for &(y, e) in g.neighbors(x) {
                    if star_of(y) != Some(c) {
                        list.push((y, x, e));
                    }
                }
            }
        }
    }

    let mut downs = Routing::new();
    let mut across = Routing::new();
    let mut receipts: Vec<(NodeId, NodeId)> = Vec::new();
    let mut input: Vec<(NodeId, Message)> = Vec::new();
    for (&c, list) in targets.iter_mut() {
        // Group by target star; targets in L_1 form singleton groups.
        list.sort_unstable_by_key(|&(y, x, e)| (star_of(y).unwrap_or(n + y), e, x, y));
        for group in list.chunk_by(|a, b| star_of(a.0).unwrap_or(n + a.0) == star_of(b.0).unwrap_or(n + b.0)) {
            let in_star = star_of(group[0].0).is_some();
            // Candidate edges in ascending edge id, as (broadcaster, target, edge).
            let edges: Vec<(NodeId, NodeId, EdgeId)> = group.iter().map(|&(y, x, e)| (x, y, e)).collect();
            let matching = if in_star { greedy_maximal_matching(&edges) } else { vec![edges[0]] };
            debug_assert!(!in_star || is_maximal_matching(&edges, &matching));
            for &(x, y, _) in &matching {
                let path = down(&k.paths[1][x]);
                input.clear();
                input.extend(group.iter().filter(|t| t.0 == y).map(|t| (t.1, sent[t.1].expect("broadcast"))));
                input.sort_unstable_by_key(|t| t.0);
                let words = io.deliver(contract, y, p, &input)?.expect("nonempty input");
                let m = sent[x].as_ref().expect("broadcast");
                if in_star {
                    if path.len() > 1 {
                        downs.add_copies(&path, item_tokens(m));
                    }
                    across.add_copies(&[x, y], item_tokens(m));
                    receipts.push((x, y));
                }
                if path.len() > 1 {
                    downs.add_copies(&path, packet_tokens(words + 1));
                }
                across.add_copies(&[x, y], packet_tokens(words));
            }
            debug_assert!(c == k.forest(1).center(group[0].1).expect("star member"));
        }
    }

    let (receive_up, receive_down) = receive_steps(k, contract, sent, &receipts, p, io)?;
    Ok(vec![
        (direct.run(g), false),
        (up.run(g), false),
        (downs.run(g), false),
        (across.run(g), false),
        (receive_up.run(g), true),
        (receive_down.run(g), true),
    ])
}
