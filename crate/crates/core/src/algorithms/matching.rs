//! Exact maximum matching in bipartite graphs by single augmentations.
//!
//! A randomized maximal matching `M̂` gives `s = 2|M̂| ≥ s*`. Phase `i` (with `|M| = i`) runs
//! [`AugmentPhase`] under the cluster simulation with search depth `⌈c · s / (s − i)⌉`; a
//! phase that finds nothing is retried once with twice the depth before `M` is declared
//! maximum.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bcsim::{simulate, BcError, BcParams};
use crate::cluster::global::{setup_global, GlobalError};
use crate::cluster::routing::tree_echo_cost;
use crate::constants::Constants;
use crate::graph::{bipartition, Graph, NodeId};
use crate::math::{ceil_usize, log2_ceil};
use crate::random::RandomStream;
use crate::sim::{run_congest, Message, Mode, NodeCtx, NodeProgram, Outbox, SimError, SimMetrics};

const TAG_PROPOSE: u8 = 60;
const TAG_ACCEPT: u8 = 61;
const TAG_PICK: u8 = 62;
const TAG_MATCHED: u8 = 63;
const TAG_SEARCH: u8 = 64;
const TAG_BACK: u8 = 65;
const TAG_SELECT: u8 = 66;
const TAG_AUGMENT: u8 = 67;

/// Randomized maximal matching (CONGEST), four rounds per iteration: every free node proposes
/// to a random free neighbor, every proposed-to node accepts one proposal at random, every
/// node with an accepted edge picks one of its (at most two) at random, and edges picked from
/// both sides join the matching and are announced.
#[derive(Clone, Copy, Debug, Default)]
pub struct IsraeliItai;

/// State of [`IsraeliItai`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsraeliItaiState {
    mate: Option<NodeId>,
    free: Vec<NodeId>,
    target: Option<NodeId>,
    accept: Option<NodeId>,
    pick: Option<NodeId>,
    fresh: bool,
    announced: bool,
}

fn random_of(list: &[NodeId], rand: &RandomStream) -> Option<NodeId> {
    if list.is_empty() {
        None
    } else {
        Some(list[rand.rng().gen_range(0..list.len())])
    }
}

impl NodeProgram for IsraeliItai {
    type Input = ();
    type State = IsraeliItaiState;
    type Output = Option<NodeId>;

    fn mode(&self) -> Mode {
        Mode::Congest
    }

    fn init(&self, ctx: &NodeCtx<'_>, _: &(), rand: &RandomStream) -> IsraeliItaiState {
        let free: Vec<NodeId> = ctx.neighbors().iter().map(|&(u, _)| u).collect();
        let target = random_of(&free, rand);
        IsraeliItaiState { mate: None, free, target, accept: None, pick: None, fresh: false, announced: false }
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &IsraeliItaiState, round: u64) -> Outbox {
        let to = |u: Option<NodeId>, tag| match u {
            Some(u) => Outbox::PerNeighbor(vec![(u, Message::new(tag, &[]))]),
            None => Outbox::Silent,
        };
        match (round - 1) % 4 {
            0 => to(s.target, TAG_PROPOSE),
            1 => to(s.accept, TAG_ACCEPT),
            2 => to(s.pick, TAG_PICK),
            _ if s.fresh => Outbox::PerNeighbor(s.free.iter().map(|&u| (u, Message::new(TAG_MATCHED, &[]))).collect()),
            _ => Outbox::Silent,
        }
    }

    fn transition(
        &self,
        _: &NodeCtx<'_>,
        s: &mut IsraeliItaiState,
        round: u64,
        inbox: &[(NodeId, Message)],
        rand: &RandomStream,
    ) {
        let from = |tag: u8| inbox.iter().filter(move |(_, m)| m.tag() == tag).map(|&(u, _)| u);
        match (round - 1) % 4 {
            0 => {
                let proposals: Vec<NodeId> = from(TAG_PROPOSE).collect();
                s.accept = if s.mate.is_none() { random_of(&proposals, rand) } else { None };
            }
            1 => {
                let mut chosen = Vec::new();
                if let Some(t) = s.target {
                    if from(TAG_ACCEPT).any(|u| u == t) {
                        chosen.push(t);
                    }
                }
                if let Some(a) = s.accept {
                    if !chosen.contains(&a) {
                        chosen.push(a);
                    }
                }
                s.pick = random_of(&chosen, rand);
            }
            2 => {
                if let Some(p) = s.pick {
                    if from(TAG_PICK).any(|u| u == p) {
                        s.mate = Some(p);
                        s.fresh = true;
                    }
                }
            }
            _ => {
                if s.fresh {
                    s.fresh = false;
                    s.announced = true;
                }
                let gone: Vec<NodeId> = from(TAG_MATCHED).collect();
                s.free.retain(|u| !gone.contains(u) && Some(*u) != s.mate);
                s.accept = None;
                s.pick = None;
                s.target = if s.mate.is_none() { random_of(&s.free, rand) } else { None };
            }
        }
    }

    fn halted(&self, s: &IsraeliItaiState) -> bool {
        if s.mate.is_some() {
            s.announced
        } else {
            s.free.is_empty()
        }
    }

    fn output(&self, s: &IsraeliItaiState) -> Option<NodeId> {
        s.mate
    }
}

/// Per-node input of [`AugmentPhase`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentInput {
    /// Side of the bipartition; searches start at free left nodes.
    pub left: bool,
    /// Current partner.
    pub mate: Option<NodeId>,
}

/// One augmentation attempt (BCONGEST), in four stages of fixed length:
///
/// 1. search, `depth` rounds: free left nodes broadcast their id; a right node joins the
///    first search it hears over a non-matching edge, a left node the one its partner
///    forwards (ties by smaller root, then smaller sender). Free right nodes that join are
///    endpoints.
/// 2. back, `depth` rounds: deepest first, every node hands the smallest `(depth, endpoint)`
///    label of its subtree to its parent.
/// 3. select, `flood` rounds: roots with a label flood `(depth, endpoint, root)`; every node
///    keeps the minimum.
/// 4. augment, `depth` rounds: the winning root walks down its best-label path, and every node
///    on it switches to the neighbor it is matched with along `M ⊕ P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentPhase {
    /// Search depth.
    pub depth: u64,
    /// Rounds of the select flood (at least the diameter).
    pub flood: u64,
}

/// State of [`AugmentPhase`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentState {
    input: AugmentInput,
    reached: Option<(NodeId, u64, Option<NodeId>)>,
    label: Option<(u64, NodeId)>,
    best_child: Option<NodeId>,
    cand: Option<(u64, NodeId, NodeId)>,
    dirty: bool,
    forward: Option<NodeId>,
    new_mate: Option<NodeId>,
    on_path: bool,
    round: u64,
}

/// Output of [`AugmentPhase`]: the partner after the phase and whether some path was
/// augmented.
pub type AugmentOutput = (Option<NodeId>, bool);

impl AugmentPhase {
    /// Rounds of the whole phase.
    pub fn rounds(&self) -> u64 {
        3 * self.depth + self.flood
    }
}

impl NodeProgram for AugmentPhase {
    type Input = AugmentInput;
    type State = AugmentState;
    type Output = AugmentOutput;

    fn mode(&self) -> Mode {
        Mode::Bcongest
    }

    fn init(&self, ctx: &NodeCtx<'_>, input: &AugmentInput, _: &RandomStream) -> AugmentState {
        let root = input.left && input.mate.is_none();
        AugmentState {
            input: *input,
            reached: root.then_some((ctx.id(), 0, None)),
            label: None,
            best_child: None,
            cand: None,
            dirty: false,
            forward: None,
            new_mate: None,
            on_path: false,
            round: 0,
        }
    }

    fn emit(&self, _: &NodeCtx<'_>, s: &AugmentState, r: u64) -> Outbox {
        let d = self.depth;
        let msg = if r <= d {
            match s.reached {
                // Left nodes forward over non-matching edges, matched right nodes to their partner.
                Some((root, depth, _)) if depth + 1 == r && (s.input.left || s.input.mate.is_some()) => {
                    Some(Message::new(TAG_SEARCH, &[root as u64, depth]))
                }
                _ => None,
            }
        } else if r <= 2 * d {
            match (s.reached, s.label) {
                (Some((_, depth, Some(parent))), Some((ld, y))) if 2 * d - depth + 1 == r => {
                    Some(Message::new(TAG_BACK, &[parent as u64, ld, y as u64]))
                }
                _ => None,
            }
        } else if r <= 2 * d + self.flood {
            match s.cand {
                Some((ld, y, root)) if s.dirty => Some(Message::new(TAG_SELECT, &[ld, y as u64, root as u64])),
                _ => None,
            }
        } else {
            s.forward.map(|t| Message::new(TAG_AUGMENT, &[t as u64]))
        };
        msg.map_or(Outbox::Silent, Outbox::Broadcast)
    }

    fn transition(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut AugmentState,
        r: u64,
        inbox: &[(NodeId, Message)],
        _: &RandomStream,
    ) {
        s.round = r;
        let d = self.depth;
        let me = ctx.id();
        if r <= d {
            if s.reached.is_none() {
                let best = inbox
                    .iter()
                    .filter(|(u, m)| {
                        m.tag() == TAG_SEARCH
                            && if s.input.left { Some(*u) == s.input.mate } else { Some(*u) != s.input.mate }
                    })
                    .map(|&(u, m)| (m.field(0) as NodeId, u))
                    .min();
                if let Some((root, parent)) = best {
                    s.reached = Some((root, r, Some(parent)));
                    if !s.input.left && s.input.mate.is_none() {
                        s.label = Some((r, me));
                    }
                }
            }
        } else if r <= 2 * d {
            for &(u, m) in inbox {
                if m.tag() == TAG_BACK && m.field(0) as NodeId == me {
                    let l = (m.field(1), m.field(2) as NodeId);
                    if s.label.is_none_or(|old| l < old) {
                        s.label = Some(l);
                        s.best_child = Some(u);
                    }
                }
            }
            if r == 2 * d {
                if let (Some((_, 0, None)), Some((ld, y))) = (s.reached, s.label) {
                    s.cand = Some((ld, y, me));
                    s.dirty = true;
                }
            }
        } else if r <= 2 * d + self.flood {
            s.dirty = false;
            for &(_, m) in inbox {
                if m.tag() == TAG_SELECT {
                    let c = (m.field(0), m.field(1) as NodeId, m.field(2) as NodeId);
                    if s.cand.is_none_or(|old| c < old) {
                        s.cand = Some(c);
                        s.dirty = true;
                    }
                }
            }
            if r == 2 * d + self.flood {
                if let Some((_, _, root)) = s.cand {
                    if root == me {
                        s.on_path = true;
                        s.new_mate = s.best_child;
                        s.forward = s.best_child;
                    }
                }
            }
        } else {
            s.forward = None;
            for &(u, m) in inbox {
                if m.tag() == TAG_AUGMENT && m.field(0) as NodeId == me {
                    s.on_path = true;
                    s.new_mate = if s.input.left { s.best_child } else { Some(u) };
                    s.forward = s.best_child;
                }
            }
        }
    }

    fn halted(&self, s: &AugmentState) -> bool {
        s.round >= self.rounds()
    }

    fn output(&self, s: &AugmentState) -> AugmentOutput {
        (if s.on_path { s.new_mate } else { s.input.mate }, s.cand.is_some())
    }

    fn input_words(&self, _: &AugmentInput) -> usize {
        2
    }

    fn output_words(&self, _: &AugmentOutput) -> usize {
        2
    }
}

/// Matching failures.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MatchingError {
    /// The graph has an odd cycle.
    #[error("graph is not bipartite")]
    NotBipartite,
    /// The graph has more than one component.
    #[error("graph has {0} components")]
    Disconnected(usize),
    /// A phase left an inconsistent matching or grew it by other than one edge.
    #[error("phase {phase} produced an invalid matching")]
    Invalid {
        /// Phase index.
        phase: usize,
    },
    /// Cluster simulation failure.
    #[error(transparent)]
    Bc(#[from] BcError),
    /// Engine failure.
    #[error(transparent)]
    Sim(#[from] SimError),
    /// Leader election failure.
    #[error(transparent)]
    Global(#[from] GlobalError),
}

/// One augmentation phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchingPhase {
    /// `|M|` before the phase.
    pub size_before: usize,
    /// Search depth of the last attempt.
    pub depth: u64,
    /// Whether the depth was doubled.
    pub doubled: bool,
    /// Whether `M` grew.
    pub augmented: bool,
}

/// Result of [`bipartite_max_matching`].
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingRun {
    /// Matched pairs `(left, right)`, sorted.
    pub matching: Vec<(NodeId, NodeId)>,
    /// Size of the maximal matching `M̂`.
    pub maximal: usize,
    /// `s = 2|M̂|`.
    pub s: usize,
    /// Phases in order.
    pub phases: Vec<MatchingPhase>,
    /// Cost.
    pub metrics: SimMetrics,
    /// Broadcasts of the phase programs.
    pub broadcasts: u64,
}

fn pairs(mate: &[Option<NodeId>], left: &[bool]) -> Option<Vec<(NodeId, NodeId)>> {
    let mut out = Vec::new();
    for (v, m) in mate.iter().enumerate() {
        if let Some(u) = *m {
            if mate[u] != Some(v) || left[u] == left[v] {
                return None;
            }
            if left[v] {
                out.push((v, u));
            }
        }
    }
    Some(out)
}

/// Maximum matching of a connected bipartite graph.
pub fn bipartite_max_matching(g: &Graph, seed: u64, constants: &Constants) -> Result<MatchingRun, MatchingError> {
    if bipartition(g).is_none() {
        return Err(MatchingError::NotBipartite);
    }
    match g.component_count() {
        1 => {}
        c => return Err(MatchingError::Disconnected(c)),
    }
    let n = g.n();
    let root = RandomStream::new(seed);
    let global = setup_global(g, root.derive("match-leader", 0).seed_u64())?;
    // Sides from the parity of the leader's BFS depth.
    let left: Vec<bool> = (0..n).map(|v| global.tree.depth(v) % 2 == 0).collect();
    let mut metrics = SimMetrics::with_edges(g.m());
    metrics.append_sequential("leader", &global.metrics);

    let max_rounds = 4 * (64 + 16 * log2_ceil(n) as u64);
    let ii = run_congest(g, &IsraeliItai, &vec![(); n], max_rounds, root.derive("israeli-itai", 0).seed_u64())?;
    metrics.append_sequential("maximal-matching", &ii.metrics);
    let mut mate = ii.outputs;
    let maximal = pairs(&mate, &left).ok_or(MatchingError::Invalid { phase: 0 })?.len();
    let s = 2 * maximal;
    metrics.append_sequential("count-maximal", &tree_echo_cost(g, &global.tree));
    let flood = (2 * global.tree.max_depth() as u64).max(1);
    let params = BcParams::from_constants(constants);

    let mut phases = Vec::new();
    let mut broadcasts = 0;
    let mut size = maximal;
    while size < s {
        let base = ceil_usize(constants.matching_budget * s as f64 / (s - size) as f64).max(1) as u64;
        let mut record = MatchingPhase { size_before: size, depth: base, doubled: false, augmented: false };
        for (k, depth) in [base, 2 * base].into_iter().enumerate() {
            let program = AugmentPhase { depth, flood };
            let inputs: Vec<AugmentInput> = (0..n).map(|v| AugmentInput { left: left[v], mate: mate[v] }).collect();
            let phase_seed = root.derive("augment", (phases.len() * 2 + k) as u64).seed_u64();
            let sim = simulate(g, &program, &inputs, program.rounds(), phase_seed, &params)?;
            metrics.append_sequential("augment", &sim.metrics);
            broadcasts += sim.broadcasts;
            record.depth = depth;
            record.doubled = k == 1;
            if sim.outputs.iter().any(|o| o.1) {
                mate = sim.outputs.iter().map(|o| o.0).collect();
                record.augmented = true;
                break;
            }
        }
        phases.push(record);
        if !record.augmented {
            break;
        }
        let now = pairs(&mate, &left).ok_or(MatchingError::Invalid { phase: phases.len() })?.len();
        if now != size + 1 {
            return Err(MatchingError::Invalid { phase: phases.len() });
        }
        size = now;
    }
    metrics.broadcasts = broadcasts;
    let mut matching = pairs(&mate, &left).ok_or(MatchingError::Invalid { phase: phases.len() })?;
    matching.sort_unstable();
    Ok(MatchingRun { matching, maximal, s, phases, metrics, broadcasts })
}
