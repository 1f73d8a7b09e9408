use congest_core::algorithms::programs::{BellmanFord, Bfs, Flood, MinAggregation, TAG_BFS};
use congest_core::graph::{generate, Graph, GraphKind, NodeId};
use congest_core::sim::{
    run_bcongest, run_congest, verify_aggregation_contract, AggregationContract, Execution, Message, Mode, NodeCtx,
    NodeProgram, Outbox, PayloadError, SimError, ViolationKind,
};
use congest_core::RandomStream;
use proptest::prelude::*;

fn path(n: usize) -> Graph {
    generate(GraphKind::Path, n, 0).unwrap()
}

fn star(leaves: usize) -> Graph {
    let pairs: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
    Graph::from_pairs(leaves + 1, &pairs).unwrap()
}

fn roots(n: usize, r: &[NodeId]) -> Vec<bool> {
    (0..n).map(|v| r.contains(&v)).collect()
}

/// Halts immediately and never sends.
struct Idle(Mode);

impl NodeProgram for Idle {
    type Input = ();
    type State = ();
    type Output = ();
    fn mode(&self) -> Mode {
        self.0
    }
    fn init(&self, _: &NodeCtx<'_>, _: &(), _: &RandomStream) {}
    fn emit(&self, _: &NodeCtx<'_>, _: &(), _: u64) -> Outbox {
        Outbox::Silent
    }
    fn transition(&self, _: &NodeCtx<'_>, _: &mut (), _: u64, _: &[(NodeId, Message)], _: &RandomStream) {}
    fn halted(&self, _: &()) -> bool {
        true
    }
    fn output(&self, _: &()) {}
}

/// Stays awake for a fixed number of rounds without sending.
struct Quiet(u64);

impl NodeProgram for Quiet {
    type Input = ();
    type State = u64;
    type Output = u64;
    fn mode(&self) -> Mode {
        Mode::Bcongest
    }
    fn init(&self, _: &NodeCtx<'_>, _: &(), _: &RandomStream) -> u64 {
        0
    }
    fn emit(&self, _: &NodeCtx<'_>, _: &u64, _: u64) -> Outbox {
        Outbox::Silent
    }
    fn transition(&self, _: &NodeCtx<'_>, s: &mut u64, _: u64, _: &[(NodeId, Message)], _: &RandomStream) {
        *s += 1;
    }
    fn halted(&self, s: &u64) -> bool {
        *s >= self.0
    }
    fn output(&self, s: &u64) -> u64 {
        *s
    }
}

/// Broadcasts a random bit every round until round `limit`; the output is the xor of everything heard.
struct Gossip {
    limit: u64,
}

impl NodeProgram for Gossip {
    type Input = ();
    type State = (u64, u64, u64);
    type Output = u64;
    fn mode(&self) -> Mode {
        Mode::Bcongest
    }
    fn init(&self, _: &NodeCtx<'_>, _: &(), rand: &RandomStream) -> (u64, u64, u64) {
        use rand::Rng;
        (0, rand.rng().gen_range(0..2), 0)
    }
    fn emit(&self, _: &NodeCtx<'_>, s: &(u64, u64, u64), _: u64) -> Outbox {
        Outbox::Broadcast(Message::new(9, &[s.1]))
    }
    fn transition(
        &self,
        _: &NodeCtx<'_>,
        s: &mut (u64, u64, u64),
        _: u64,
        inbox: &[(NodeId, Message)],
        rand: &RandomStream,
    ) {
        use rand::Rng;
        s.0 += 1;
        s.2 ^= inbox.iter().fold(0, |a, (_, m)| a ^ m.field(0));
        s.1 = rand.rng().gen_range(0..2);
    }
    fn halted(&self, s: &(u64, u64, u64)) -> bool {
        s.0 >= self.limit
    }
    fn output(&self, s: &(u64, u64, u64)) -> u64 {
        s.2
    }
}

/// Sends one message with a field that is too wide.
struct Wide;

impl NodeProgram for Wide {
    type Input = ();
    type State = bool;
    type Output = ();
    fn mode(&self) -> Mode {
        Mode::Congest
    }
    fn init(&self, _: &NodeCtx<'_>, _: &(), _: &RandomStream) -> bool {
        false
    }
    fn emit(&self, ctx: &NodeCtx<'_>, _: &bool, _: u64) -> Outbox {
        if ctx.id() == 1 {
            Outbox::PerNeighbor(vec![(0, Message::new(0, &[1 << 40]))])
        } else {
            Outbox::Silent
        }
    }
    fn transition(&self, _: &NodeCtx<'_>, s: &mut bool, _: u64, _: &[(NodeId, Message)], _: &RandomStream) {
        *s = true;
    }
    fn halted(&self, s: &bool) -> bool {
        *s
    }
    fn output(&self, _: &bool) {}
}

#[test]
fn isolated_node_halting_in_init() {
    let g = Graph::from_pairs(1, &[]).unwrap();
    let run = run_congest(&g, &Idle(Mode::Congest), &[()], 10, 1).unwrap();
    assert_eq!(run.metrics.rounds, 0);
    assert_eq!(run.metrics.messages, 0);
}

#[test]
fn flood_on_path_congest() {
    let g = path(4);
    let run = run_congest(&g, &Flood { mode: Mode::Congest }, &roots(4, &[0]), 100, 1).unwrap();
    assert_eq!(run.metrics.rounds, 3);
    assert_eq!(run.metrics.messages, 3);
    assert_eq!(run.outputs, vec![Some(0), Some(1), Some(2), Some(3)]);
    assert_eq!(run.metrics.edge_congestion, vec![1, 1, 1]);
}

#[test]
fn bfs_on_path_bcongest() {
    let g = path(4);
    let run = run_bcongest(&g, &Bfs::default(), &roots(4, &[0]), 100, 1).unwrap();
    assert_eq!(run.metrics.broadcasts, 4);
    assert_eq!(run.metrics.rounds, 4);
    assert_eq!(run.metrics.messages, 6);
    let dist: Vec<_> = run.outputs.iter().map(|o| o.0.unwrap()).collect();
    assert_eq!(dist, vec![0, 1, 2, 3]);
    assert_eq!(run.outputs[3].1, Some(2));
}

#[test]
fn bfs_on_star_bcongest() {
    let g = star(3);
    let run = run_bcongest(&g, &Bfs::default(), &roots(4, &[0]), 100, 1).unwrap();
    assert_eq!(run.metrics.broadcasts, 4);
    assert_eq!(run.metrics.messages, 6);
}

#[test]
fn silent_program_costs_nothing() {
    let g = generate(GraphKind::Gnp { p: 0.3 }, 20, 3).unwrap();
    let run = run_bcongest(&g, &Quiet(5), &vec![(); 20], 100, 1).unwrap();
    assert_eq!(run.metrics.broadcasts, 0);
    assert_eq!(run.metrics.messages, 0);
    assert_eq!(run.metrics.rounds, 5);
}

#[test]
fn depth_limited_bfs_on_path() {
    let g = path(8);
    let run = run_bcongest(&g, &Bfs { depth_limit: Some(3) }, &roots(8, &[0]), 100, 1).unwrap();
    let reached: Vec<_> = run.outputs.iter().map(|o| o.0.is_some()).collect();
    assert_eq!(reached, vec![true, true, true, true, false, false, false, false]);
}

#[test]
fn mode_mismatch_rejected() {
    let g = path(2);
    let err = run_congest(&g, &Bfs::default(), &roots(2, &[0]), 10, 0).unwrap_err();
    assert!(matches!(err, SimError::ModeMismatch { .. }));
}

#[test]
fn payload_over_budget_names_sender() {
    let g = path(2);
    let err = run_congest(&g, &Wide, &[(), ()], 10, 0).unwrap_err();
    match err {
        SimError::Payload { node, round, source } => {
            assert_eq!((node, round), (1, 1));
            assert!(matches!(source, PayloadError::FieldTooWide { .. }));
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn timeout_carries_partial_metrics() {
    let g = path(3);
    let err = run_bcongest(&g, &Gossip { limit: 50 }, &[(), (), ()], 10, 0).unwrap_err();
    match err {
        SimError::Timeout { max_rounds, partial } => {
            assert_eq!(max_rounds, 10);
            assert_eq!(partial.rounds, 10);
            assert_eq!(partial.broadcasts, 30);
            assert_eq!(partial.messages, 40);
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn round_barrier() {
    // A message emitted in round r is seen only by the round-r transition of its receiver.
    let g = path(6);
    let bfs = Bfs::default();
    let mut exec = Execution::new(&g, &bfs, &roots(6, &[0]), 0, Mode::Bcongest).unwrap();
    let mut log = Vec::new();
    while !exec.all_halted() {
        exec.step_observed(&mut |v, r, _s, inbox| {
            for (from, m) in inbox {
                if m.tag() == TAG_BFS {
                    log.push((r, *from, v, m.field(0)));
                }
            }
        })
        .unwrap();
    }
    for (r, from, _to, d) in log {
        // The sender at distance d broadcasts in round d + 1 and nowhere else.
        assert_eq!(r, d + 1);
        assert_eq!(from as u64, d);
    }
}

#[test]
fn bellman_ford_weighted_path() {
    let g = Graph::from_weighted(3, &[(0, 1, 5), (1, 2, 2)]).unwrap();
    let run = run_bcongest(&g, &BellmanFord, &[(), (), ()], 1000, 0).unwrap();
    assert_eq!(run.outputs[0], vec![0, 5, 7]);
    assert_eq!(run.outputs[2], vec![7, 2, 0]);
}

#[test]
fn contract_min_aggregation_passes() {
    let g = generate(GraphKind::Gnp { p: 0.3 }, 40, 5).unwrap();
    let report = verify_aggregation_contract(&g, &Bfs::default(), &roots(40, &[0]), &MinAggregation, 1000, 9).unwrap();
    assert!(report.ok(), "{:?}", report.violations);
    assert_eq!(report.trials, 1000);
    assert!(report.max_words <= 8);
}

#[test]
fn contract_min_is_partition_invariant_by_hand() {
    // Node 2 hears distance 3 and distance 5; any partition leaves the minimum.
    let g = path(3);
    let ctx = NodeCtx::new(&g, 1);
    let m = vec![(0, Message::new(TAG_BFS, &[3])), (2, Message::new(TAG_BFS, &[5]))];
    let rand = RandomStream::new(0);
    let bfs = Bfs::default();
    let init = bfs.init(&ctx, &false, &rand);
    let mut full = init.clone();
    bfs.transition(&ctx, &mut full, 1, &m, &rand);
    for split in [vec![vec![m[0]], vec![m[1]]], vec![m.clone()]] {
        let mut union: Vec<_> = split.iter().flat_map(|p| MinAggregation.aggregate(1, 1, p)).collect();
        union.sort();
        let mut s = init.clone();
        bfs.transition(&ctx, &mut s, 1, &union, &rand);
        assert_eq!(s, full);
        assert_eq!(s.dist, Some(4));
    }
}

/// Keeps only the first sender, whatever it says.
struct FirstOnly;

impl AggregationContract for FirstOnly {
    fn aggregate(&self, _: NodeId, _: u64, msgs: &[(NodeId, Message)]) -> Vec<(NodeId, Message)> {
        msgs.iter().max_by_key(|(from, _)| *from).into_iter().copied().collect()
    }
}

#[test]
fn contract_broken_aggregation_flagged() {
    let g = generate(GraphKind::Gnp { p: 0.3 }, 40, 5).unwrap();
    let srcs: Vec<bool> = (0..40).map(|v| v % 7 == 0).collect();
    let report = verify_aggregation_contract(&g, &BellmanFord, &vec![(); 40], &FirstOnly, 300, 1).unwrap();
    assert!(!report.ok());
    assert!(report.violations.iter().any(|v| v.kind == ViolationKind::StateMismatch));
    let report = verify_aggregation_contract(&g, &Bfs::default(), &srcs, &FirstOnly, 300, 1).unwrap();
    assert!(!report.ok());
}

fn small_graph() -> impl Strategy<Value = Graph> {
    (2usize..24, 0.05f64..0.6, any::<u64>()).prop_map(|(n, p, s)| generate(GraphKind::Gnp { p }, n, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bcongest_accounting(g in small_graph(), seed in any::<u64>()) {
        let n = g.n();
        let run = run_bcongest(&g, &Gossip { limit: 6 }, &vec![(); n], 100, seed).unwrap();
        let m = &run.metrics;
        prop_assert!(m.is_consistent());
        prop_assert_eq!(m.messages, m.edge_congestion.iter().sum::<u64>());
        prop_assert_eq!(m.messages, m.received);
        prop_assert_eq!(m.messages, 6 * 2 * g.m() as u64);
        prop_assert_eq!(m.broadcasts, 6 * n as u64);
        prop_assert!(m.broadcasts <= m.rounds * n as u64);
    }

    #[test]
    fn bfs_messages_equal_reached_degree_sum(g in small_graph(), s in 0usize..24) {
        let n = g.n();
        let src = s % n;
        let run = run_bcongest(&g, &Bfs::default(), &roots(n, &[src]), 1000, 0).unwrap();
        let hops = g.bfs_hops(src);
        let expect: u64 = (0..n).filter(|&v| hops[v].is_some()).map(|v| g.degree(v) as u64).sum();
        prop_assert_eq!(run.metrics.messages, expect);
        for v in 0..n {
            prop_assert_eq!(run.outputs[v].0, hops[v]);
        }
    }

    #[test]
    fn determinism(g in small_graph(), seed in any::<u64>()) {
        let n = g.n();
        let a = run_bcongest(&g, &Gossip { limit: 4 }, &vec![(); n], 100, seed).unwrap();
        let b = run_bcongest(&g, &Gossip { limit: 4 }, &vec![(); n], 100, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
