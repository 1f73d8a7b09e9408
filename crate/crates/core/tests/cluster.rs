use congest_core::cluster::bs::{build_ensemble_with, kappa_for, prune_threshold};
use congest_core::cluster::global::{elect_leader, setup_global, GlobalError, SharedRandomness};
use congest_core::cluster::ldc::{draw_shift, shift_cap, LdcViolation};
use congest_core::cluster::{
    build_bs_hierarchy, build_ensemble, downcast, ldc_decompose, upcast, validate_cluster_edge_cases, validate_ldc,
    validate_pruned, validate_radius, BsHierarchy, BsLevel, BsParams, BsViolation, CastError, ClusterForest, LdcError,
    Routing,
};
use congest_core::graph::{connected_gnp, generate, Graph, GraphKind, NodeId};
use congest_core::sim::{Message, SimMetrics};
use congest_core::RandomStream;
use proptest::prelude::*;

fn path(n: usize) -> Graph {
    generate(GraphKind::Path, n, 0).unwrap()
}

fn star(leaves: usize) -> Graph {
    let pairs: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
    Graph::from_pairs(leaves + 1, &pairs).unwrap()
}

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    connected_gnp(n, p, seed, 100).unwrap().expect("connected sample").0
}

fn rooted_at_zero(g: &Graph) -> ClusterForest {
    let dist = g.bfs_hops(0);
    let parents = (0..g.n())
        .map(|v| {
            if v == 0 {
                return None;
            }
            g.neighbors(v).iter().map(|&(u, _)| u).filter(|&u| dist[u].unwrap() + 1 == dist[v].unwrap()).min()
        })
        .collect();
    ClusterForest::from_parents(g, parents, &vec![true; g.n()]).unwrap()
}

fn hops_to_center(f: &ClusterForest, v: NodeId) -> u64 {
    let mut d = 0;
    let mut u = v;
    while let Some(p) = f.parent(u) {
        d += 1;
        u = p;
    }
    d
}

#[test]
fn upcast_on_path_counts_every_hop() {
    let g = path(4);
    let f = rooted_at_zero(&g);
    let up = upcast(&g, &f, &[vec![], vec![7], vec![8], vec![9]]).unwrap();
    assert_eq!(up.metrics.messages, 6);
    assert_eq!(up.collected[0], vec![(1, 7), (2, 8), (3, 9)]);
    assert!(up.metrics.is_consistent());
}

#[test]
fn upcast_on_star_takes_one_round() {
    let g = star(5);
    let f = rooted_at_zero(&g);
    let inputs: Vec<Vec<u64>> = (0..6).map(|v| if v == 0 { vec![] } else { vec![v as u64] }).collect();
    let up = upcast(&g, &f, &inputs).unwrap();
    assert_eq!((up.metrics.rounds, up.metrics.messages), (1, 5));
}

#[test]
fn downcast_examples() {
    let g = star(4);
    let f = rooted_at_zero(&g);
    let m = Message::new(1, &[5]);
    let d = downcast(&g, &f, &[(0, 1, m), (0, 3, m)]).unwrap();
    assert_eq!(d.metrics.messages, 2);
    assert!(d.metrics.rounds <= 3);
    assert_eq!(d.delivered[3], vec![m]);

    let g = path(4);
    let f = rooted_at_zero(&g);
    let d = downcast(&g, &f, &[(0, 3, m)]).unwrap();
    assert_eq!((d.metrics.messages, d.metrics.rounds), (3, 3));

    let d = downcast(&g, &f, &[]).unwrap();
    assert_eq!((d.metrics.messages, d.metrics.rounds), (0, 0));
}

#[test]
fn cast_errors() {
    let g = path(4);
    let parents = vec![None, Some(0), None, Some(2)];
    let f = ClusterForest::from_parents(&g, parents, &[true, true, true, true]).unwrap();
    let m = Message::new(1, &[0]);
    assert_eq!(downcast(&g, &f, &[(0, 3, m)]).unwrap_err(), CastError::DestinationOutside { center: 0, dest: 3 });
    assert_eq!(downcast(&g, &f, &[(1, 1, m)]).unwrap_err(), CastError::NotACenter(1));
    let partial = ClusterForest::from_parents(&g, vec![None; 4], &[true, false, false, false]).unwrap();
    assert_eq!(upcast(&g, &partial, &[vec![], vec![1], vec![], vec![]]).unwrap_err(), CastError::NotInForest(1));
}

#[test]
fn routing_is_fifo_per_directed_edge() {
    let g = path(3);
    let mut r = Routing::new();
    r.add_path([0, 1, 2]);
    r.add_path([1, 2]);
    r.add_path([2, 1, 0]);
    let rep = r.run(&g);
    // Token 1 crosses (1, 2) in round 1, before token 0 gets there.
    assert_eq!(rep.arrivals, vec![2, 1, 2]);
    assert_eq!(rep.messages, 5);
    assert_eq!(rep.congestion, vec![(0, 2), (1, 3)]);

    let mut r = Routing::new();
    r.add_copies(&[0, 1], 3);
    assert_eq!(r.run(&g).arrivals, vec![1, 2, 3]);
}

#[test]
fn forest_rejects_bad_parents() {
    let g = path(3);
    assert!(ClusterForest::from_parents(&g, vec![Some(1), Some(0), None], &[true; 3]).is_err());
    assert!(ClusterForest::from_parents(&g, vec![None, None, Some(0)], &[true; 3]).is_err());
    assert!(ClusterForest::from_parents(&g, vec![None, Some(0), None], &[false, true, true]).is_err());
}

fn forest_case() -> impl Strategy<Value = (Graph, ClusterForest, Vec<Vec<u64>>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec((any::<u32>(), any::<bool>()), n),
            proptest::collection::vec((0..n, 0..n), 0..2 * n),
            proptest::collection::vec(0usize..3, n),
        )
            .prop_map(|(n, choice, extra, words)| {
                let mut pairs = Vec::new();
                let mut parents = vec![None; n];
                for v in 1..n {
                    if !choice[v].1 {
                        let p = choice[v].0 as usize % v;
                        pairs.push((p, v));
                        parents[v] = Some(p);
                    }
                }
                pairs.extend(extra.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))));
                pairs.sort_unstable();
                pairs.dedup();
                let g = Graph::from_pairs(n, &pairs).unwrap();
                let f = ClusterForest::from_parents(&g, parents, &vec![true; n]).unwrap();
                let inputs = (0..n).map(|v| (0..words[v] as u64).map(|w| w + 10 * v as u64).collect()).collect();
                (g, f, inputs)
            })
    })
}

proptest! {
    #[test]
    fn upcast_messages_match_hop_oracle((g, f, inputs) in forest_case()) {
        let up = upcast(&g, &f, &inputs).unwrap();
        let oracle: u64 = (0..g.n()).map(|v| inputs[v].len() as u64 * hops_to_center(&f, v)).sum();
        prop_assert_eq!(up.metrics.messages, oracle);
        prop_assert!(up.metrics.is_consistent());
        let tokens: u64 = inputs.iter().map(|w| w.len() as u64).sum();
        prop_assert!(up.metrics.rounds <= tokens + f.max_depth() as u64);
        for (c, members) in f.clusters() {
            let want: usize = members.iter().map(|&v| inputs[v].len()).sum();
            prop_assert_eq!(up.collected[c].len(), want);
        }
    }

    #[test]
    fn downcast_messages_match_hop_oracle((g, f, inputs) in forest_case()) {
        let m = Message::new(1, &[1]);
        let sends: Vec<(NodeId, NodeId, Message)> = (0..g.n())
            .flat_map(|v| inputs[v].iter().map(move |_| v))
            .map(|v| (f.center(v).unwrap(), v, m))
            .collect();
        let d = downcast(&g, &f, &sends).unwrap();
        let oracle: u64 = sends.iter().map(|&(_, v, _)| hops_to_center(&f, v)).sum();
        prop_assert_eq!(d.metrics.messages, oracle);
        prop_assert!(d.metrics.rounds <= sends.len() as u64 + f.max_depth() as u64);
    }
}

#[test]
fn leader_tree_is_a_bfs_tree() {
    for seed in 0..5 {
        let g = gnp(80, 0.08, seed);
        let t = elect_leader(&g, seed).unwrap();
        let dist = g.bfs_hops(t.leader);
        for v in 0..g.n() {
            assert_eq!(Some(t.tree.depth(v) as u64), dist[v]);
            assert_eq!(t.tree.center(v), Some(t.leader));
        }
        assert!(t.metrics.is_consistent());
    }
}

#[test]
fn leader_needs_connectivity() {
    let g = Graph::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
    assert_eq!(elect_leader(&g, 1).unwrap_err(), GlobalError::Disconnected(2));
}

#[test]
fn shared_randomness_costs_words_per_tree_edge() {
    let g = gnp(50, 0.1, 3);
    let t = setup_global(&g, 3).unwrap();
    let s = SharedRandomness::distribute(&g, &t, 3, 0, 7);
    assert_eq!(s.metrics.messages, 7 * 49);
    assert_eq!(s.metrics.rounds, 7 + t.tree.max_depth() as u64 - 1);
    let again = SharedRandomness::distribute(&g, &t, 3, 0, 7);
    for i in 0..7 {
        let x = s.segment_in(i, 5, 9);
        assert!((5..=9).contains(&x));
        assert_eq!(x, again.segment_in(i, 5, 9));
    }
}

#[test]
fn ldc_without_edges_is_all_singletons() {
    let g = Graph::from_pairs(5, &[]).unwrap();
    let d = ldc_decompose(&g, 0.5, 1).unwrap();
    assert!((0..5).all(|v| d.center(v) == v));
    assert!(d.f_out.iter().all(Vec::is_empty));
    assert_eq!(d.metrics.messages, 0);
}

/// `argmax_c (δ_c − dist(c, v))`, ties to the smaller center.
fn mpx_oracle(g: &Graph, beta: f64, seed: u64) -> Vec<NodeId> {
    let n = g.n();
    let cap = shift_cap(n, beta);
    let shift: Vec<i64> = (0..n).map(|v| draw_shift(&RandomStream::node_round(seed, v, 0), beta, cap) as i64).collect();
    let dist: Vec<Vec<Option<u64>>> = (0..n).map(|c| g.bfs_hops(c)).collect();
    (0..n)
        .map(|v| {
            (0..n).filter_map(|c| dist[c][v].map(|d| (shift[c] - d as i64, std::cmp::Reverse(c)))).max().unwrap().1 .0
        })
        .collect()
}

#[test]
fn ldc_matches_shift_oracle() {
    let mut cases = vec![generate(GraphKind::Clique, 8, 0).unwrap()];
    for seed in 0..6 {
        cases.push(gnp(64, 0.1, seed));
    }
    cases.push(generate(GraphKind::Grid, 49, 0).unwrap());
    for (i, g) in cases.iter().enumerate() {
        let seed = 100 + i as u64;
        let d = ldc_decompose(g, 0.5, seed).unwrap();
        assert_eq!(d.attempts, 1);
        let oracle = mpx_oracle(g, 0.5, seed);
        for v in 0..g.n() {
            assert_eq!(d.center(v), oracle[v], "graph {i}, node {v}");
        }
        assert_eq!(d.metrics.messages, 2 * g.m() as u64);
    }
}

#[test]
fn ldc_validator_accepts_and_catches() {
    for seed in 0..10 {
        let g = gnp(128, 0.1, seed);
        let d = ldc_decompose(&g, 0.5, seed).unwrap();
        let stats = validate_ldc(&g, &d).unwrap();
        assert!(stats.max_diameter <= d.r_bound);
        assert_eq!(stats.max_f_degree, stats.max_neighbor_clusters);
    }
    let g = generate(GraphKind::Grid, 121, 0).unwrap();
    let mut d = ldc_decompose(&g, 0.5, 1).unwrap();
    let v = (0..g.n()).find(|&v| !d.f_out[v].is_empty()).unwrap();
    d.f_out[v].pop();
    assert!(matches!(validate_ldc(&g, &d), Err(LdcViolation::Uncovered { .. })));
}

#[test]
fn ldc_rejects_bad_beta() {
    let g = path(3);
    assert_eq!(ldc_decompose(&g, 0.0, 1).unwrap_err(), LdcError::InvalidBeta(0.0));
    assert_eq!(ldc_decompose(&g, 1.5, 1).unwrap_err(), LdcError::InvalidBeta(1.5));
}

#[test]
fn kappa_one_keeps_every_edge() {
    let g = gnp(40, 0.2, 2);
    let h = build_bs_hierarchy(&g, 1.0, 2).unwrap();
    assert_eq!(h.kappa, 1);
    assert_eq!(h.levels[1].clusters.member_count(), 0);
    assert_eq!(h.levels[1].low, (0..40).collect::<Vec<_>>());
    assert_eq!(h.f_edges(), (0..g.m()).collect::<Vec<_>>());
    assert!(h.cluster_edge_mask(&g).iter().all(|&c| !c));
}

#[test]
fn half_level_clusters_are_stars() {
    for seed in 0..8 {
        let g = gnp(256, 0.1, seed);
        let h = build_bs_hierarchy(&g, 0.5, seed).unwrap();
        assert_eq!(h.kappa, 2);
        assert!(h.levels[1].clusters.max_depth() <= 1);
        validate_radius(&g, &h).unwrap();
        let pruned = h.prune(&g).unwrap();
        assert_eq!(pruned.levels[1].clusters, h.levels[1].clusters);
        validate_pruned(&pruned).unwrap();
    }
}

#[test]
fn edge_cases_hold_exhaustively_on_small_graphs() {
    for (k, eps) in [0.5, 1.0 / 3.0, 0.25, 0.2].into_iter().enumerate() {
        for seed in 0..6 {
            let g = gnp(64, 0.12, seed);
            let h = build_bs_hierarchy(&g, eps, seed * 10 + k as u64).unwrap();
            assert_eq!(h.kappa, kappa_for(eps));
            validate_radius(&g, &h).unwrap();
            validate_cluster_edge_cases(&g, &h, 0..g.m()).unwrap();
            let p = h.prune(&g).unwrap();
            validate_radius(&g, &p).unwrap();
            validate_cluster_edge_cases(&g, &p, 0..g.m()).unwrap();
            validate_pruned(&p).unwrap();
        }
    }
}

#[test]
fn degree_bound_and_cost() {
    for seed in 0..4 {
        let g = gnp(200, 0.1, seed);
        let h = build_bs_hierarchy(&g, 1.0 / 3.0, seed).unwrap();
        let r = h.degree_report(BsParams::default().degree_factor);
        assert!(r.max_degree <= r.limit);
        assert!(h.metrics.is_consistent());
        // Per level: sample bits down the trees, one announce, one join message per node.
        let bound = h.kappa as u64 * (2 * g.m() as u64 + 2 * g.n() as u64);
        assert!(h.metrics.messages <= bound, "{} > {bound}", h.metrics.messages);
    }
}

#[test]
fn uncovered_edge_is_reported() {
    let g = gnp(64, 0.12, 4);
    let mut h = build_bs_hierarchy(&g, 1.0, 4).unwrap();
    let v = 5;
    let (u, _) = h.levels[1].f_out[v].pop().unwrap();
    let e = g.edge_between(u, v).unwrap();
    assert!(matches!(validate_cluster_edge_cases(&g, &h, [e]), Err(BsViolation::Uncovered { u: 5, .. })));
}

/// 27 nodes, `ε = 1/3`, threshold 9. Level 2 holds one cluster centered at 0 built from `edges`;
/// everything else sits in `L_1`.
fn broom(edges: &[(NodeId, NodeId)]) -> (Graph, BsHierarchy) {
    let n = 27;
    let g = Graph::from_pairs(n, edges).unwrap();
    let mut parents = vec![None; n];
    let mut member = vec![false; n];
    member[0] = true;
    for &(p, c) in edges {
        parents[c] = Some(p);
        member[c] = true;
    }
    let top = ClusterForest::from_parents(&g, parents, &member).unwrap();
    let rest: Vec<NodeId> = (0..n).filter(|&v| !member[v]).collect();
    let inside: Vec<NodeId> = (0..n).filter(|&v| member[v]).collect();
    let mut low_level = vec![1; n];
    for &v in &inside {
        low_level[v] = 3;
    }
    let level = |clusters, low: Vec<NodeId>| BsLevel { clusters, low, f_out: vec![Vec::new(); n] };
    let l1 = ClusterForest::from_parents(&g, vec![None; n], &member).unwrap();
    let h = BsHierarchy {
        epsilon: 1.0 / 3.0,
        kappa: 3,
        levels: vec![
            level(ClusterForest::singletons(n), vec![]),
            level(l1, rest),
            level(top, vec![]),
            level(ClusterForest::empty(n), inside),
        ],
        sample_level: vec![0; n],
        low_level,
        pruned: false,
        attempts: 1,
        metrics: SimMetrics::with_edges(g.m()),
    };
    (g, h)
}

#[test]
fn pruning_splits_the_broom_handle() {
    assert_eq!(prune_threshold(27, 1.0 / 3.0), 9);
    // 0 -> 1 -> {2..=10}, and 0 -> {11, 12, 13}.
    let mut edges = vec![(0, 1), (0, 11), (0, 12), (0, 13)];
    edges.extend((2..=10).map(|v| (1, v)));
    let (g, h) = broom(&edges);
    let p = h.prune(&g).unwrap();
    let clusters = p.levels[2].clusters.clusters();
    assert_eq!(clusters, vec![(0, vec![0, 11, 12, 13]), (1, (1..=10).collect())]);
    validate_pruned(&p).unwrap();
    assert!(validate_pruned(&h).is_err());
    // Node 0 now reaches the split cluster through its only edge into it.
    assert_eq!(p.levels[3].f_out[0], vec![(1, g.edge_between(0, 1).unwrap())]);
}

#[test]
fn pruning_splits_deepest_first() {
    // 0 -> 1 -> 2, with 9 leaves under 2 and 9 leaves under 1.
    let mut edges = vec![(0, 1), (1, 2)];
    edges.extend((3..=11).map(|v| (2, v)));
    edges.extend((12..=20).map(|v| (1, v)));
    let (g, h) = broom(&edges);
    let p = h.prune(&g).unwrap();
    let centers: Vec<NodeId> = p.levels[2].clusters.clusters().into_iter().map(|c| c.0).collect();
    assert_eq!(centers, vec![0, 1, 2]);
    assert_eq!(p.levels[2].clusters.center(12), Some(1));
    assert_eq!(p.levels[2].clusters.center(5), Some(2));
}

#[test]
fn pruning_adds_few_clusters() {
    for seed in 0..4 {
        let g = gnp(300, 0.03, seed);
        let eps = 0.25;
        let h = build_bs_hierarchy(&g, eps, seed).unwrap();
        let p = h.prune(&g).unwrap();
        let limit = 300usize.div_ceil(prune_threshold(300, eps));
        for i in 1..h.kappa {
            let before = h.levels[i].clusters.clusters().len();
            let after = p.levels[i].clusters.clusters().len();
            assert!(after - before <= limit);
            assert_eq!(p.levels[i].clusters.member_count(), h.levels[i].clusters.member_count());
        }
        validate_pruned(&p).unwrap();
        validate_cluster_edge_cases(&g, &p, 0..g.m()).unwrap();
    }
}

#[test]
fn ensemble_of_degenerate_hierarchies() {
    let g = gnp(16, 0.3, 1);
    let e = build_ensemble(&g, 1.0, 1).unwrap();
    assert_eq!(e.zeta, 16);
    for h in &e.hierarchies {
        assert!(h.pruned);
        assert_eq!(h.f_edges(), (0..g.m()).collect::<Vec<_>>());
    }
    let mut seen: Vec<usize> = (0..16).flat_map(|j| e.batch(j, 50)).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..50).collect::<Vec<_>>());
    assert_eq!(e.hierarchy_of(17), 1);
}

#[test]
fn ensemble_members_differ() {
    let g = gnp(100, 0.1, 2);
    let e = build_ensemble_with(&g, &BsParams { epsilon: 0.5, ..BsParams::default() }, 2).unwrap();
    assert_eq!(e.zeta, 10);
    assert_ne!(e.hierarchies[0].levels[1], e.hierarchies[1].levels[1]);
    let again = build_ensemble(&g, 0.5, 2).unwrap();
    assert_eq!(e, again);
}

#[test]
fn cluster_edges_are_rare() {
    let g = gnp(256, 0.1, 9);
    let builds = 100;
    let mut hits = vec![0u32; g.m()];
    for s in 0..builds {
        let h = build_bs_hierarchy(&g, 0.5, 1000 + s).unwrap().prune(&g).unwrap();
        for (e, c) in h.cluster_edge_mask(&g).into_iter().enumerate() {
            hits[e] += u32::from(c);
        }
    }
    let mean = hits.iter().map(|&h| h as f64).sum::<f64>() / (g.m() as f64 * builds as f64);
    assert!(mean <= 4.0 * 2.0 / 16.0, "mean cluster-edge rate {mean}");
}

#[test]
fn dump_lists_every_level() {
    let g = gnp(60, 0.1, 5);
    let h = build_bs_hierarchy(&g, 1.0 / 3.0, 5).unwrap();
    let d = h.dump();
    assert_eq!(d.levels.len(), 4);
    let low: usize = d.levels.iter().map(|l| l.low.len()).sum();
    assert_eq!(low, 60);
    let f: usize = d.levels.iter().map(|l| l.f_edges.len()).sum();
    let direct: usize = h.levels.iter().map(|l| l.f_out.iter().map(Vec::len).sum::<usize>()).sum();
    assert_eq!(f, direct);
}
