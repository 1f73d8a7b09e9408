use congest_core::algorithms::apsp::{limited_plan, regime_for, resolve_with_landmarks, MAX_RESEEDS};
use congest_core::algorithms::cover::phase_radius;
use congest_core::algorithms::{
    apsp_unweighted_tradeoff, apsp_weighted_msgopt, bfs_apsp, bfs_certificate, bipartite_max_matching, dijkstra_apsp,
    hopcroft_karp, is_matching, landmark_phase, multi_bfs_full, multi_bfs_limited, neighborhood_cover, validate_cover,
    ApspError, CoverTree, CoverViolation, DistanceMatrix, MatchingError, Regime,
};
use congest_core::constants::Constants;
use congest_core::graph::{bipartite_gnp, bipartition, connected_gnp, generate, Graph, GraphKind};
use congest_core::math::log2_at_least_one;
use congest_core::NodeId;
use proptest::prelude::*;

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    connected_gnp(n, p, seed, 100).unwrap().expect("connected sample").0
}

fn path(n: usize) -> Graph {
    generate(GraphKind::Path, n, 0).unwrap()
}

fn cycle(n: usize) -> Graph {
    let pairs: Vec<(NodeId, NodeId)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Graph::from_pairs(n, &pairs).unwrap()
}

fn star(leaves: usize) -> Graph {
    let pairs: Vec<(NodeId, NodeId)> = (1..=leaves).map(|v| (0, v)).collect();
    Graph::from_pairs(leaves + 1, &pairs).unwrap()
}

fn connected_bipartite(left: usize, right: usize, p: f64, seed: u64) -> Graph {
    (0..1000u64)
        .map(|a| bipartite_gnp(left, right, p, seed * 1000 + a).unwrap())
        .find(|g| g.is_connected())
        .expect("connected bipartite sample")
}

fn c() -> Constants {
    Constants::default()
}

#[test]
fn oracles_on_fixtures() {
    let d = bfs_apsp(&path(3));
    assert_eq!(
        d.rows(),
        vec![vec![Some(0), Some(1), Some(2)], vec![Some(1), Some(0), Some(1)], vec![Some(2), Some(1), Some(0)]]
    );
    let k33: Vec<(NodeId, NodeId)> = (0..3).flat_map(|a| (3..6).map(move |b| (a, b))).collect();
    let g = Graph::from_pairs(6, &k33).unwrap();
    let side = bipartition(&g).unwrap();
    assert_eq!(hopcroft_karp(&g, &side).len(), 3);
    assert_eq!(hopcroft_karp(&path(4), &bipartition(&path(4)).unwrap()).len(), 2);
    let w = Graph::from_weighted(3, &[(0, 1, 5), (1, 2, 2)]).unwrap();
    assert_eq!(dijkstra_apsp(&w).row(0), &[Some(0), Some(5), Some(7)]);
}

#[test]
fn dijkstra_equals_bfs_on_unit_weights() {
    for seed in 0..50 {
        let g = generate(GraphKind::Gnp { p: 0.1 }, 40, seed).unwrap();
        let d = bfs_apsp(&g);
        assert_eq!(dijkstra_apsp(&g), d);
        d.check_invariants(true).unwrap();
    }
}

#[test]
fn matrix_checks_catch_broken_entries() {
    let mut d = bfs_apsp(&path(4));
    assert_eq!(d.infinite_count(), 0);
    let sum = d.checksum();
    d.set(0, 3, Some(9));
    assert!(d.check_invariants(true).is_err());
    d.set(3, 0, Some(9));
    assert!(matches!(d.check_invariants(true), Err(congest_core::algorithms::MatrixViolation::Triangle(..))));
    assert_ne!(d.checksum(), sum);
    assert!(bfs_certificate(&path(4), &d).is_err());
    assert_eq!(DistanceMatrix::new(2).infinite_count(), 2);
}

fn brute_matching(g: &Graph) -> usize {
    let m = g.m();
    (0u32..1 << m)
        .filter(|mask| {
            let pairs: Vec<(NodeId, NodeId)> =
                (0..m).filter(|&e| mask >> e & 1 == 1).map(|e| (g.edge(e).u, g.edge(e).v)).collect();
            is_matching(g, &pairs)
        })
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hopcroft_karp_is_maximum(left in 1usize..6, right in 1usize..6, p in 0.1f64..0.9, seed in 0u64..1000) {
        let g = bipartite_gnp(left, right, p, seed).unwrap();
        prop_assume!(g.m() <= 14);
        let side = bipartition(&g).unwrap();
        let hk = hopcroft_karp(&g, &side);
        prop_assert!(is_matching(&g, &hk));
        prop_assert_eq!(hk.len(), brute_matching(&g));
    }

    #[test]
    fn dijkstra_rows_satisfy_invariants(n in 2usize..24, p in 0.05f64..0.6, seed in 0u64..1000) {
        let g = generate(GraphKind::Gnp { p }, n, seed).unwrap().with_random_weights(1, 20, seed).unwrap();
        let d = dijkstra_apsp(&g);
        prop_assert!(d.check_invariants(true).is_ok());
        for (u, v) in (0..n).flat_map(|u| (0..n).map(move |v| (u, v))) {
            prop_assert_eq!(d.get(u, v).is_some(), g.bfs_hops(u)[v].is_some());
        }
    }
}

#[test]
fn weighted_path_fixture() {
    let g = Graph::from_weighted(3, &[(0, 1, 5), (1, 2, 2)]).unwrap();
    let run = apsp_weighted_msgopt(&g, 1, &c()).unwrap();
    assert_eq!(run.distances.row(0), &[Some(0), Some(5), Some(7)]);
    assert_eq!(run.distances, dijkstra_apsp(&g));
}

#[test]
fn weighted_apsp_equals_dijkstra_within_message_bound() {
    let consts = c();
    for seed in 0..4 {
        let g = gnp(64, 0.3, seed).with_random_weights(1, 100, seed).unwrap();
        let run = apsp_weighted_msgopt(&g, seed, &consts).unwrap();
        assert_eq!(run.distances, dijkstra_apsp(&g), "seed {seed}");
        run.distances.check_invariants(true).unwrap();
        let log = log2_at_least_one(64);
        let words = (run.metrics.in_bits + run.metrics.out_bits) as f64 / log + run.broadcasts as f64;
        assert!(
            (run.metrics.messages as f64) <= consts.message_bound * words * log * log,
            "messages {} vs In+Out+B {words}",
            run.metrics.messages
        );
    }
}

#[test]
fn weighted_apsp_rejects_disconnected_graphs() {
    let g = Graph::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
    assert_eq!(apsp_weighted_msgopt(&g, 0, &c()).unwrap_err(), ApspError::Disconnected(2));
}

#[test]
fn regimes_split_at_the_thresholds() {
    // 1/⌈log₂ 128⌉ = 1/7.
    assert_eq!(regime_for(128, 0.1), Regime::Weighted);
    assert_eq!(regime_for(128, 1.0 / 7.0), Regime::Weighted);
    assert_eq!(regime_for(128, 0.25), Regime::Limited);
    assert_eq!(regime_for(128, 0.5), Regime::Full);
    assert_eq!(regime_for(128, 1.0), Regime::Full);
}

#[test]
fn tradeoff_on_a_short_path() {
    let g = path(3);
    for eps in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let run = apsp_unweighted_tradeoff(&g, eps, 3, &c()).unwrap();
        assert_eq!(run.distances, bfs_apsp(&g), "eps {eps}");
    }
}

#[test]
fn tradeoff_equals_bfs_oracle() {
    let consts = c();
    for seed in 0..2 {
        let g = gnp(128, 0.1, seed);
        let oracle = bfs_apsp(&g);
        for (eps, regime) in
            [(0.1, Regime::Weighted), (0.25, Regime::Limited), (0.5, Regime::Full), (1.0, Regime::Full)]
        {
            let run = apsp_unweighted_tradeoff(&g, eps, seed, &consts).unwrap();
            assert_eq!(run.regime, regime);
            assert!(run.attempts <= MAX_RESEEDS + 1);
            assert_eq!(run.distances, oracle, "eps {eps}, seed {seed}");
        }
    }
}

#[test]
fn tradeoff_rejects_bad_inputs() {
    let g = gnp(20, 0.3, 0);
    assert_eq!(apsp_unweighted_tradeoff(&g, 1.5, 0, &c()).unwrap_err(), ApspError::Epsilon(1.5));
    let w = g.with_random_weights(1, 3, 0).unwrap();
    assert_eq!(apsp_unweighted_tradeoff(&w, 0.5, 0, &c()).unwrap_err(), ApspError::Weighted);
}

#[test]
fn full_multi_bfs_on_a_star() {
    let g = star(4);
    let run = multi_bfs_full(&g, 0.75, 2, &c()).unwrap();
    assert_eq!(run.late, 0);
    for s in 0..5 {
        for v in 0..5 {
            let (d, parent) = run.trees[v][s].expect("reached");
            let expect = match (s, v) {
                _ if s == v => 0,
                (0, _) | (_, 0) => 1,
                _ => 2,
            };
            assert_eq!(d, expect);
            if v != s {
                assert!(g.edge_between(v, parent).is_some());
                assert_eq!(run.trees[parent][s].unwrap().0 + 1, d);
            }
        }
    }
}

#[test]
fn full_multi_bfs_equals_oracle() {
    for seed in 0..4 {
        let g = gnp(64, 0.3, seed);
        let run = multi_bfs_full(&g, 0.75, seed, &c()).unwrap();
        assert_eq!(run.distances(), bfs_apsp(&g), "seed {seed}");
    }
    assert_eq!(multi_bfs_full(&path(4), 0.25, 0, &c()).unwrap_err(), ApspError::Epsilon(0.25));
}

#[test]
fn limited_multi_bfs_cuts_at_the_depth_limit() {
    let g = path(16);
    let run = multi_bfs_limited(&g, 0.5, 1, &c()).unwrap();
    // L = 4 · 4 · 4 = 64 covers the whole path.
    assert_eq!(run.depth_limit, Some(64));
    assert_eq!(run.distances(), bfs_apsp(&g));

    let short = Constants { depth_factor: 0.25, ..c() };
    let run = multi_bfs_limited(&g, 0.5, 1, &short).unwrap();
    assert_eq!(run.depth_limit, Some(4));
    let d = run.distances();
    for u in 0..16usize {
        for v in 0..16usize {
            let hops = u.abs_diff(v) as u64;
            assert_eq!(d.get(u, v), (hops <= 4).then_some(hops), "({u}, {v})");
        }
    }
}

#[test]
fn limited_multi_bfs_is_exact_where_defined() {
    let short = Constants { depth_factor: 0.05, ..c() };
    for seed in 0..3 {
        let g = gnp(128, 0.15, seed);
        let oracle = bfs_apsp(&g);
        let run = multi_bfs_limited(&g, 0.25, seed, &short).unwrap();
        let plan = limited_plan(&g, 0.25, seed, &short).unwrap();
        assert_eq!(plan.batches.len(), 4);
        let d = run.distances();
        for u in 0..128 {
            for v in 0..128 {
                let o = oracle.get(u, v).unwrap();
                match d.get(u, v) {
                    Some(x) => assert_eq!(x, o),
                    None => assert!(o > run.depth_limit.unwrap()),
                }
            }
        }
        let audit = run.audit.unwrap();
        assert_eq!(audit.per_component_max.len(), 4);
        assert!(run.schedule.unwrap().rounds > 0);
    }
}

#[test]
fn landmarks_on_fixtures() {
    // A complete graph is fully resolved already.
    let g = generate(GraphKind::Clique, 12, 0).unwrap();
    let full = bfs_apsp(&g);
    let lm = landmark_phase(&g, 0.5, &full, 3, &c()).unwrap();
    assert_eq!(lm.distances, full);
    assert!(!lm.landmarks.is_empty());

    // A path with the landmark forced at the middle joins the two halves.
    let g = path(21);
    let mut partial = DistanceMatrix::new(21);
    for u in 0..21usize {
        for v in 0..21usize {
            if u.abs_diff(v) <= 3 {
                partial.set(u, v, Some(u.abs_diff(v) as u64));
            }
        }
    }
    let (d, trees, metrics) = resolve_with_landmarks(&g, &partial, &[10], 0).unwrap();
    assert_eq!(d.get(0, 20), Some(20));
    assert_eq!(d.get(2, 15), Some(13));
    // Pairs off the landmark only get the detour through it.
    assert_eq!(d.get(0, 5), Some(15));
    assert_eq!(trees[0].len(), 20);
    assert!(metrics.messages > 0);
}

#[test]
fn landmarks_resolve_far_pairs_on_a_cycle() {
    let consts = Constants { depth_factor: 0.05, ..c() };
    let g = cycle(128);
    let oracle = bfs_apsp(&g);
    for seed in 0..5 {
        let run = multi_bfs_limited(&g, 0.25, seed, &consts).unwrap();
        let lm = landmark_phase(&g, 0.25, &run.distances(), seed, &consts).unwrap();
        assert_eq!(lm.distances, oracle, "seed {seed}");
    }
}

#[test]
fn matching_fixtures() {
    let k33: Vec<(NodeId, NodeId)> = (0..3).flat_map(|a| (3..6).map(move |b| (a, b))).collect();
    let g = Graph::from_pairs(6, &k33).unwrap();
    let run = bipartite_max_matching(&g, 0, &c()).unwrap();
    assert_eq!(run.matching.len(), 3);
    assert!(is_matching(&g, &run.matching));

    let run = bipartite_max_matching(&path(4), 0, &c()).unwrap();
    assert_eq!(run.matching.len(), 2);

    assert_eq!(bipartite_max_matching(&cycle(5), 0, &c()).unwrap_err(), MatchingError::NotBipartite);
}

#[test]
fn matching_equals_hopcroft_karp() {
    for seed in 0..12u64 {
        let (l, r) = (20 + (seed as usize * 7) % 40, 20 + (seed as usize * 13) % 40);
        let p = 0.15 + 0.02 * seed as f64;
        let g = connected_bipartite(l, r, p, seed);
        let run = bipartite_max_matching(&g, seed, &c()).unwrap();
        let hk = hopcroft_karp(&g, &bipartition(&g).unwrap());
        assert!(is_matching(&g, &run.matching));
        assert_eq!(run.matching.len(), hk.len(), "seed {seed}");
        assert!(run.s >= hk.len() && run.maximal * 2 >= hk.len());
        // Every phase but the last grows the matching by one.
        let grown = run.phases.iter().filter(|p| p.augmented).count();
        assert_eq!(run.maximal + grown, run.matching.len());
        for (i, ph) in run.phases.iter().enumerate() {
            assert_eq!(ph.size_before, run.maximal + i);
        }
    }
}

#[test]
fn cover_fixtures() {
    let consts = c();
    let g = star(6);
    let run = neighborhood_cover(&g, 1, 1, 0, &consts).unwrap();
    assert!(run.trees.iter().any(|t| t.members.len() == 7));

    // W at least the diameter: every tree grown from a center is the whole graph.
    let g = path(6);
    let run = neighborhood_cover(&g, 1, 5, 0, &consts).unwrap();
    assert!(run.trees.iter().all(|t| t.members.len() == 6));
    assert!(run.stats.max_depth <= 5);

    assert_eq!(phase_radius(2, 1, 2), 6);
    assert_eq!(phase_radius(2, 2, 2), 2);
}

#[test]
fn cover_properties_on_random_graphs() {
    let consts = c();
    for seed in 0..3 {
        let g = gnp(128, 0.1, seed);
        for (k, w) in [(1, 1), (2, 2)] {
            let run = neighborhood_cover(&g, k, w, seed, &consts).unwrap();
            let stats = validate_cover(&g, &run.trees, k, w, &consts).unwrap();
            assert_eq!(stats, run.stats);
            assert!(stats.max_depth <= stats.depth_bound);
            assert!(stats.max_membership as f64 <= stats.membership_bound);
        }
    }
}

#[test]
fn cover_validator_rejects_bad_covers() {
    let consts = c();
    let g = path(5);
    let single = |center: NodeId| CoverTree { center, phase: 1, radius: 0, members: vec![(center, 0, center)] };
    let trees: Vec<CoverTree> = (0..5).map(single).collect();
    assert!(matches!(validate_cover(&g, &trees, 1, 1, &consts), Err(CoverViolation::Neighborhood { .. })));
    let bad = CoverTree { center: 0, phase: 1, radius: 2, members: vec![(0, 0, 0), (2, 1, 0)] };
    assert!(matches!(validate_cover(&g, &[bad], 1, 1, &consts), Err(CoverViolation::Tree { node: 2, .. })));
}
