use congest_core::aggsim::{
    audit_distinct_sources, central_schedule, combine_on_hierarchies, combine_with_smoothing, general_budget,
    greedy_maximal_matching, is_maximal_matching, schedule_bfs, simulate_general, simulate_star, star_budget, AggError,
    AggParams, Component, PhaseTrace, Simulator,
};
use congest_core::algorithms::programs::{Bfs, Flood, MinAggregation};
use congest_core::cluster::{build_bs_hierarchy, BsHierarchy, BsParams};
use congest_core::constants::Constants;
use congest_core::graph::{connected_gnp, generate, Graph, GraphKind};
use congest_core::math::{ln_at_least_one, log2_at_least_one, powf};
use congest_core::sim::{run_bcongest, AggregationContract, Message, Mode};
use congest_core::NodeId;
use proptest::prelude::*;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    connected_gnp(n, p, seed, 100).unwrap().expect("connected sample").0
}

fn pruned(g: &Graph, epsilon: f64, seed: u64) -> BsHierarchy {
    build_bs_hierarchy(g, epsilon, seed).unwrap().prune(g).unwrap()
}

fn roots(n: usize, r: &[usize]) -> Vec<bool> {
    (0..n).map(|v| r.contains(&v)).collect()
}

fn params() -> AggParams {
    AggParams { shadow: true, ..AggParams::default() }
}

#[test]
fn epsilon_one_is_a_direct_run() {
    for seed in 0..4 {
        let g = gnp(40, 0.2, seed);
        let h = pruned(&g, 1.0, seed);
        assert_eq!(h.kappa, 1);
        let inputs = roots(40, &[seed as usize]);
        let direct = run_bcongest(&g, &Bfs::default(), &inputs, 100, seed).unwrap();
        let a = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 40, seed, &params()).unwrap();
        let b = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 40, seed, &params()).unwrap();
        assert_eq!(a.outputs, direct.outputs);
        assert_eq!(b.outputs, direct.outputs);
        assert_eq!(a.broadcasts, direct.metrics.broadcasts);
        // Nothing to learn: every cluster above level 0 is empty.
        assert_eq!(b.metrics.stage("learn-hierarchy").messages, 0);
        // Each broadcast crosses each incident edge once.
        assert_eq!(b.metrics.stage("phases").messages, direct.metrics.messages);
    }
}

#[test]
fn bfs_matches_direct_run_on_both_simulations() {
    for seed in 0..6 {
        let g = gnp(64, 0.3, seed);
        let inputs = roots(64, &[(7 * seed as usize) % 64]);
        let direct = run_bcongest(&g, &Bfs::default(), &inputs, 100, seed).unwrap();
        for eps in [0.25, 1.0 / 3.0, 0.5] {
            let h = pruned(&g, eps, seed);
            let s = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 64, seed, &params()).unwrap();
            assert_eq!(s.outputs, direct.outputs, "general, eps {eps}, seed {seed}");
            assert_eq!(s.broadcasts, direct.metrics.broadcasts);
            assert!(s.metrics.is_consistent());
        }
        for eps in [0.5, 0.75] {
            let h = pruned(&g, eps, seed);
            let s = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 64, seed, &params()).unwrap();
            assert_eq!(s.outputs, direct.outputs, "star, eps {eps}, seed {seed}");
        }
    }
}

#[test]
fn several_roots_match_and_flood_is_not_aggregation_based() {
    let g = gnp(80, 0.1, 9);
    let inputs = roots(80, &[0, 13, 41]);
    let direct = run_bcongest(&g, &Bfs::default(), &inputs, 1000, 9).unwrap();
    let h = pruned(&g, 0.4, 9);
    let s = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 80, 9, &params()).unwrap();
    assert_eq!(s.outputs, direct.outputs);
    let h = pruned(&g, 0.6, 9);
    let s = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 80, 9, &params()).unwrap();
    assert_eq!(s.outputs, direct.outputs);
    // Flood keeps every sender in its state, so keeping one message per packet is visible.
    let flood = Flood { mode: Mode::Bcongest };
    let err = simulate_star(&g, &flood, &MinAggregation, &inputs, &h, 80, 9, &params()).unwrap_err();
    assert!(matches!(err, AggError::Divergence { .. }), "{err:?}");
}

#[test]
fn per_phase_congestion_is_split_by_edge_kind() {
    for seed in 0..5 {
        let g = gnp(128, 0.15, seed);
        let n = 128;
        let log = log2_at_least_one(n);
        let inputs = roots(n, &[0]);
        let h = pruned(&g, 0.34, seed);
        let s = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 128, seed, &params()).unwrap();
        assert!((s.max_phase_cluster_load as f64) <= 4.0 * n as f64 * log * log, "seed {seed}");
        assert!((s.max_phase_other_load as f64) <= 4.0 * log * log, "seed {seed}: {}", s.max_phase_other_load);

        let h = pruned(&g, 0.5, seed);
        let s = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 128, seed, &params()).unwrap();
        let bound = 4.0 * powf(n, 0.5) * log * log;
        assert!((s.max_phase_cluster_load as f64) <= bound, "seed {seed}: {}", s.max_phase_cluster_load);
    }
}

#[test]
fn phases_are_charged_at_their_budget() {
    let g = gnp(64, 0.2, 2);
    let h = pruned(&g, 0.5, 2);
    let inputs = roots(64, &[5]);
    let s = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 64, 2, &params()).unwrap();
    assert_eq!(s.budget, general_budget(64, 8.0));
    assert_eq!(s.metrics.stage("phases").rounds, 64 * s.budget);
    assert!(s.metrics.per_phase.iter().all(|ph| ph.rounds <= s.budget));
    let s = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 64, 2, &params()).unwrap();
    assert_eq!(s.budget, star_budget(64, 0.5, 8.0));
    assert_eq!(s.metrics.stage("phases").rounds, 64 * s.budget);
}

#[test]
fn errors_are_reported() {
    let g = generate(GraphKind::Path, 30, 0).unwrap();
    let inputs = roots(30, &[0]);
    let h = pruned(&g, 0.3, 0);
    let zero = AggParams { c2: 0.0, ..params() };
    let err = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 30, 0, &zero).unwrap_err();
    assert!(matches!(err, AggError::Budget { budget: 0, .. }), "{err:?}");
    let err = simulate_general(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 5, 0, &params()).unwrap_err();
    assert_eq!(err, AggError::RoundBound(5));
    let err = simulate_star(&g, &Bfs::default(), &MinAggregation, &inputs, &h, 30, 0, &params()).unwrap_err();
    assert_eq!(err, AggError::NotStar(h.kappa));
}

/// Keeps the largest sender instead of the smallest: breaks the BFS parent rule.
struct MaxAggregation;

impl AggregationContract for MaxAggregation {
    fn aggregate(&self, _: NodeId, _: u64, msgs: &[(NodeId, Message)]) -> Vec<(NodeId, Message)> {
        msgs.iter().max_by_key(|&&(u, _)| u).into_iter().copied().collect()
    }
}

/// Invents a message.
struct Forger;

impl AggregationContract for Forger {
    fn aggregate(&self, _: NodeId, _: u64, _: &[(NodeId, Message)]) -> Vec<(NodeId, Message)> {
        vec![(0, Message::new(1, &[0]))]
    }
}

#[test]
fn bad_contracts_are_caught() {
    let g = gnp(64, 0.3, 4);
    let h = pruned(&g, 0.5, 4);
    let inputs = roots(64, &[0]);
    let err = simulate_general(&g, &Bfs::default(), &MaxAggregation, &inputs, &h, 64, 4, &params()).unwrap_err();
    assert!(matches!(err, AggError::Divergence { .. }), "{err:?}");
    let err = simulate_star(&g, &Bfs::default(), &Forger, &inputs, &h, 64, 4, &params()).unwrap_err();
    assert!(matches!(err, AggError::Contract { .. }), "{err:?}");
}

#[test]
fn single_source_schedule_is_plain_bfs() {
    let g = generate(GraphKind::Path, 12, 0).unwrap();
    let plan = schedule_bfs(&g, &[0], None, 1, &Constants::default()).unwrap();
    assert_eq!(plan.spec.delays, vec![1]);
    let audit = audit_distinct_sources(&g, &plan, 1).unwrap();
    let hops = g.bfs_hops(0);
    for v in 0..12 {
        assert_eq!(audit.outputs[v].trees[0].map(|t| t.0), hops[v]);
        assert_eq!(audit.outputs[v].late, 0);
    }
    // Node 11 finalizes in global round 11; every node forwards once.
    let (t, _) = plan.program.slot_of(audit.rounds);
    assert_eq!(t, 11 + 1);
    assert_eq!(audit.max_distinct, 1);
}

#[test]
fn depth_limit_cuts_the_tree() {
    let g = generate(GraphKind::Path, 10, 0).unwrap();
    let plan = schedule_bfs(&g, &[0], Some(3), 0, &Constants::default()).unwrap();
    let audit = audit_distinct_sources(&g, &plan, 0).unwrap();
    let reached: Vec<usize> = (0..10).filter(|&v| audit.outputs[v].trees[0].is_some()).collect();
    assert_eq!(reached, vec![0, 1, 2, 3]);
    assert_eq!(audit.outputs[3].trees[0], Some((3, 2)));
}

#[test]
fn all_sources_schedule_hears_few_distinct_instances() {
    let n = 128;
    for seed in 0..2 {
        let g = gnp(n, 0.1, seed);
        let sources: Vec<usize> = (0..n).collect();
        let plan = schedule_bfs(&g, &sources, None, seed, &Constants::default()).unwrap();
        let audit = audit_distinct_sources(&g, &plan, seed).unwrap();
        assert!((audit.max_distinct as f64) <= 4.0 * ln_at_least_one(n), "{}", audit.max_distinct);
        for s in 0..n {
            let hops = g.bfs_hops(s);
            for v in 0..n {
                assert_eq!(audit.outputs[v].trees[s].map(|t| t.0), hops[v]);
            }
        }
        assert!(audit.rounds <= plan.t_a);
    }
}

#[test]
fn star_simulation_runs_every_bfs() {
    let n = 64;
    for seed in 0..2 {
        let g = gnp(n, 0.2, seed);
        let sources: Vec<usize> = (0..n).collect();
        let plan = schedule_bfs(&g, &sources, None, seed, &Constants::default()).unwrap();
        let h = pruned(&g, 0.75, seed);
        let s = simulate_star(&g, &plan.program, &plan.program, &plan.inputs, &h, plan.t_a, seed, &params()).unwrap();
        for src in 0..n {
            let hops = g.bfs_hops(src);
            for v in 0..n {
                assert_eq!(s.outputs[v].trees[src].map(|t| t.0), hops[v]);
            }
        }
    }
}

#[test]
fn one_component_on_one_hierarchy_is_a_plain_simulation() {
    let g = gnp(64, 0.2, 3);
    let h = pruned(&g, 0.5, 3);
    let plan = schedule_bfs(&g, &[0, 9, 17, 33], None, 3, &Constants::default()).unwrap();
    let comp = Component { program: plan.program.clone(), inputs: plan.inputs.clone(), t_a: plan.t_a, seed: 3 };
    let combined =
        combine_on_hierarchies(&g, &[comp], std::slice::from_ref(&h), &|_| 0, Simulator::General, 3, &params())
            .unwrap();
    let single = simulate_general(&g, &plan.program, &plan.program, &plan.inputs, &h, plan.t_a, 3, &params()).unwrap();
    assert_eq!(combined.outputs[0], single.outputs);
    assert_eq!(combined.metrics.messages, single.metrics.messages);
    assert_eq!(combined.metrics.rounds, single.metrics.rounds);
    assert_eq!(combined.schedule.delays, vec![0]);
    assert_eq!(combined.schedule.max_overlap, 1);
}

fn batches(g: &Graph, zeta: usize, seed: u64) -> Vec<Component<congest_core::aggsim::MultiBfs>> {
    let n = g.n();
    (0..zeta)
        .map(|j| {
            let sources: Vec<usize> = (j..n).step_by(zeta).collect();
            let plan = schedule_bfs(g, &sources, None, seed + j as u64, &Constants::default()).unwrap();
            Component { program: plan.program, inputs: plan.inputs, t_a: plan.t_a, seed: seed + j as u64 }
        })
        .collect()
}

#[test]
fn ensemble_spreads_cluster_edge_load() {
    let g = gnp(100, 0.3, 1);
    let bs = BsParams { epsilon: 0.5, ..BsParams::default() };
    let comps = batches(&g, 10, 1);
    let quick = AggParams { shadow: false, ..params() };
    let ens = combine_with_smoothing(&g, &comps, &bs, Simulator::General, 1, &quick).unwrap();
    assert_eq!(ens.hierarchies_used, 10);
    let h = pruned(&g, 0.5, 1);
    let ctl =
        combine_on_hierarchies(&g, &comps, std::slice::from_ref(&h), &|_| 0, Simulator::General, 1, &quick).unwrap();
    assert_eq!(ens.outputs, ctl.outputs);
    assert!(ens.audit.max_cluster < ctl.audit.max_cluster, "{} vs {}", ens.audit.max_cluster, ctl.audit.max_cluster);
    for (j, comp) in ens.outputs.iter().enumerate() {
        for (k, src) in (j..100).step_by(10).enumerate() {
            let hops = g.bfs_hops(src);
            assert!((0..100).all(|v| comp[v].trees[k].map(|t| t.0) == hops[v]));
        }
    }
    assert!(ens.schedule.ratio() <= 4.0, "{:?}", ens.schedule);
}

#[test]
fn central_schedule_counts_overlaps() {
    let a = vec![PhaseTrace { p: 1, rounds: 5, loads: vec![(0, 3), (1, 1)] }];
    let b = vec![PhaseTrace { p: 1, rounds: 4, loads: vec![(1, 2)] }];
    let r = central_schedule(&[&a, &b], &[1, 1], &[10, 10], 16, 2, 0);
    assert_eq!(r.congestion, 3);
    assert_eq!(r.dilation, 10);
    // Range ⌈3 / (10 · 4)⌉ = 1: the two phases either share a step or not.
    if r.delays[0] == r.delays[1] {
        assert_eq!(r.max_overlap, 2);
        assert_eq!(r.rounds, r.steps * 10);
    } else {
        assert_eq!(r.max_overlap, 1);
    }
    assert_eq!(r.bound, 3 + 10 * 4);
}

proptest! {
    #[test]
    fn greedy_matching_is_maximal(raw in proptest::collection::vec((0usize..8, 0usize..8), 0..30)) {
        let mut edges: Vec<(usize, usize, usize)> = raw.iter().map(|&(x, y)| (x, 100 + y, 0)).collect();
        edges.sort_unstable();
        edges.dedup();
        for (i, e) in edges.iter_mut().enumerate() {
            e.2 = i;
        }
        let m = greedy_maximal_matching(&edges);
        prop_assert!(is_maximal_matching(&edges, &m));
        if let Some((_, rest)) = m.split_first() {
            // Dropping a matched edge leaves it addable.
            prop_assert!(!is_maximal_matching(&edges, rest));
        }
    }
}
