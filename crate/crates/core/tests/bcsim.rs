use congest_core::algorithms::programs::{BellmanFord, Bfs, Flood};
use congest_core::bcsim::{phase_budget, preprocess, simulate, BcError, BcParams};
use congest_core::graph::{connected_gnp, generate, Graph, GraphKind};
use congest_core::math::log2_at_least_one;
use congest_core::sim::{run_bcongest, Message, Mode, NodeCtx, NodeProgram, Outbox};
use congest_core::{NodeId, RandomStream};

fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    connected_gnp(n, p, seed, 100).unwrap().expect("connected sample").0
}

fn roots(n: usize, r: &[usize]) -> Vec<bool> {
    (0..n).map(|v| r.contains(&v)).collect()
}

fn params() -> BcParams {
    BcParams { shadow: true, ..BcParams::default() }
}

#[test]
fn bfs_on_path_matches_direct_run() {
    let g = generate(GraphKind::Path, 8, 0).unwrap();
    let inputs = roots(8, &[0]);
    let direct = run_bcongest(&g, &Bfs::default(), &inputs, 100, 5).unwrap();
    let sim = simulate(&g, &Bfs::default(), &inputs, 8, 5, &params()).unwrap();
    assert_eq!(sim.outputs, direct.outputs);
    assert_eq!(sim.broadcasts, direct.metrics.broadcasts);
    assert_eq!(sim.non_f_crossings, 0);
}

#[test]
fn corpus_matches_direct_runs() {
    for seed in 0..6 {
        let g = gnp(64, 0.3, seed);
        let n = g.n();
        let inputs = roots(n, &[seed as usize % n]);
        let d = run_bcongest(&g, &Bfs::default(), &inputs, 1000, seed).unwrap();
        let s = simulate(&g, &Bfs::default(), &inputs, n as u64, seed, &params()).unwrap();
        assert_eq!(s.outputs, d.outputs);

        let flood = Flood { mode: Mode::Bcongest };
        let inputs = roots(n, &[1, 7]);
        let d = run_bcongest(&g, &flood, &inputs, 1000, seed).unwrap();
        let s = simulate(&g, &flood, &inputs, n as u64, seed, &params()).unwrap();
        assert_eq!(s.outputs, d.outputs);

        let w = g.with_random_weights(1, 100, seed).unwrap();
        let d = run_bcongest(&w, &BellmanFord, &vec![(); n], 100_000, seed).unwrap();
        let s = simulate(&w, &BellmanFord, &vec![(); n], (n * n) as u64, seed, &params()).unwrap();
        assert_eq!(s.outputs, d.outputs);
        assert_eq!(s.broadcasts, d.metrics.broadcasts);
        let bound =
            64.0 * (s.metrics.in_bits + s.metrics.out_bits + s.broadcasts) as f64 * log2_at_least_one(n).powi(2);
        assert!((s.metrics.messages as f64) <= bound);
    }
}

#[test]
fn per_phase_counts_match_hop_oracle() {
    let g = gnp(64, 0.1, 3);
    let inputs = roots(64, &[0]);
    let s = simulate(&g, &Bfs::default(), &inputs, 64, 3, &params()).unwrap();
    let d = &s.decomposition;
    let f = &d.forest;
    let direct = run_bcongest(&g, &Bfs::default(), &inputs, 100, 3).unwrap();
    // Each BFS node broadcasts once, in round dist + 1.
    for ph in &s.metrics.per_phase {
        let senders: Vec<usize> = (0..64).filter(|&v| direct.outputs[v].0 == Some(ph.p - 1)).collect();
        assert_eq!(ph.broadcasters, senders.len() as u64);
        let mut step1 = 0;
        let mut step2 = 0;
        for &v in &senders {
            for &(w, _) in &d.f_out[v] {
                // A distance plus the sender id fits one message.
                step1 += f.depth(v) as u64 + 1;
                step2 += f.depth(w) as u64;
            }
        }
        assert_eq!((ph.messages_step1, ph.messages_step2), (step1, step2), "phase {}", ph.p);
        let log = log2_at_least_one(64);
        let per_phase = (ph.messages_step1 + ph.messages_step2) as f64;
        assert!(per_phase <= 64.0 * ph.broadcasters as f64 * log * log + 64.0);
    }
    assert!(s.metrics.is_consistent());
}

/// Never sends anything and halts at once.
struct Quiet;

impl NodeProgram for Quiet {
    type Input = ();
    type State = ();
    type Output = ();
    fn mode(&self) -> Mode {
        Mode::Bcongest
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

#[test]
fn silent_program_costs_only_preprocessing() {
    let g = gnp(40, 0.2, 1);
    let s = simulate(&g, &Quiet, &vec![(); 40], 10, 1, &params()).unwrap();
    assert_eq!(s.metrics.stage("phases").messages, 0);
    assert!(s.metrics.per_phase.is_empty());
    let pre = preprocess(&g, &Quiet, &vec![(); 40], 1, &params()).unwrap();
    let downcast = s.metrics.stage("downcast-outputs").messages;
    assert_eq!(s.metrics.messages, pre.metrics.messages + downcast);
}

#[test]
fn preprocessing_examples() {
    let one = Graph::from_pairs(1, &[]).unwrap();
    let pre = preprocess(&one, &Bfs::default(), &[true], 0, &params()).unwrap();
    assert_eq!(pre.metrics.stage("upcast-inputs").messages, 0);

    let star = Graph::from_pairs(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
    let inputs = vec![true, false, true, false, false];
    let pre = preprocess(&star, &Bfs::default(), &inputs, 0, &params()).unwrap();
    assert_eq!(pre.ledger.inputs, inputs);
    for v in 0..5 {
        let want: Vec<usize> = star.neighbors(v).iter().map(|&(u, _)| u).collect();
        assert_eq!(pre.ledger.known_neighbors[v], want);
    }

    let g = gnp(128, 0.2, 2);
    let inputs = roots(128, &[0]);
    let pre = preprocess(&g, &Bfs::default(), &inputs, 2, &params()).unwrap();
    let input_bits = 128.0 * 7.0;
    let bound = 16.0 * (input_bits + g.m() as f64 * 7.0);
    assert!((pre.metrics.messages as f64) <= bound, "{} > {bound}", pre.metrics.messages);
}

#[test]
fn tiny_budget_is_reported() {
    let g = generate(GraphKind::Path, 200, 0).unwrap();
    let p = BcParams { c1: 0.0, ..params() };
    let err = simulate(&g, &Bfs::default(), &roots(200, &[0]), 200, 4, &p).unwrap_err();
    assert!(matches!(err, BcError::Budget { budget: 0, .. }), "{err:?}");
    assert_eq!(phase_budget(64, 8.0), 3072);
}

#[test]
fn short_round_bound_is_reported() {
    let g = generate(GraphKind::Path, 10, 0).unwrap();
    let err = simulate(&g, &Bfs::default(), &roots(10, &[0]), 3, 0, &params()).unwrap_err();
    assert_eq!(err, BcError::RoundBound(3));
}
