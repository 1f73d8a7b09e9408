use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use super::engine::Execution;
use super::{Message, Mode, NodeCtx, NodeProgram, SimError};
use crate::graph::{Graph, NodeId};
use crate::random::RandomStream;

/// Default size budget of one aggregate, in words.
pub const S_MAX_WORDS: usize = 8;

/// The per-node, per-round compression function of an aggregation-based program.
///
/// `aggregate` must return a subset of its input such that, for any partition of an inbox,
/// feeding the transition the union of the per-part aggregates gives the same state as the
/// full inbox. Contracts must also be composition-safe: re-aggregating an aggregate together
/// with further raw messages must be as good as aggregating everything at once.
pub trait AggregationContract {
    /// `agg_{node, round}` applied to `msgs` (sender-sorted, distinct senders).
    fn aggregate(&self, node: NodeId, round: u64, msgs: &[(NodeId, Message)]) -> Vec<(NodeId, Message)>;

    /// Encoded size of an aggregate in words: one sender id plus the fields, per kept message.
    fn encoded_words(&self, agg: &[(NodeId, Message)]) -> usize {
        agg.iter().map(|(_, m)| 1 + m.fields().len()).sum()
    }

    /// Size budget for this aggregate, in words.
    fn word_budget(&self, _agg: &[(NodeId, Message)]) -> usize {
        S_MAX_WORDS
    }
}

/// Kind of contract violation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Transition on the union of aggregates differs from transition on the full inbox.
    StateMismatch,
    /// Re-aggregation of an aggregate with more messages changed the resulting state.
    CompositionMismatch,
    /// An aggregate exceeded its word budget.
    OverBudget {
        /// Encoded size.
        words: usize,
        /// Budget.
        budget: usize,
    },
    /// The aggregate contains a message that was not in its input.
    NotASubset,
}

/// One violation found while sampling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractViolation {
    /// Receiving node.
    pub node: NodeId,
    /// Round of the sampled inbox.
    pub round: u64,
    /// Number of parts in the sampled partition.
    pub parts: usize,
    /// What failed.
    pub kind: ViolationKind,
}

/// Result of [`verify_aggregation_contract`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ContractReport {
    /// Partitions checked.
    pub trials: usize,
    /// Distinct reachable `(state, inbox)` pairs the trials were drawn from.
    pub sampled_pairs: usize,
    /// Largest encoded aggregate seen, in words.
    pub max_words: usize,
    /// Everything that went wrong.
    pub violations: Vec<ContractViolation>,
}

impl ContractReport {
    /// No violations.
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Sample<S> {
    node: NodeId,
    round: u64,
    state: S,
    inbox: Vec<(NodeId, Message)>,
}

fn union_sorted(parts: Vec<Vec<(NodeId, Message)>>) -> Vec<(NodeId, Message)> {
    let set: BTreeSet<(NodeId, Message)> = parts.into_iter().flatten().collect();
    set.into_iter().collect()
}

/// Samples reachable `(state, inbox)` pairs from a direct run of `program` on `g` and checks
/// the aggregation law on random partitions of each inbox, plus the size budget and
/// composition safety. Report-only: violations are collected, never raised.
///
/// Pairs are reservoir-sampled over every non-empty inbox of the run; `trials` partitions are
/// drawn, cycling over the sampled pairs.
pub fn verify_aggregation_contract<P, C>(
    g: &Graph,
    program: &P,
    inputs: &[P::Input],
    contract: &C,
    trials: usize,
    seed: u64,
) -> Result<ContractReport, SimError>
where
    P: NodeProgram,
    P::State: PartialEq,
    C: AggregationContract + ?Sized,
{
    let root = RandomStream::new(seed).derive("contract", 0);
    let mut pick = root.derive("reservoir", 0).rng();
    let mut samples: Vec<Sample<P::State>> = Vec::new();
    let mut seen = 0usize;
    let cap = trials.max(1);
    let mut exec = Execution::new(g, program, inputs, seed, Mode::Bcongest)?;
    let max_rounds = 1_000_000;
    while !exec.all_halted() && exec.round() < max_rounds {
        exec.step_observed(&mut |node, round, state, inbox| {
            if inbox.is_empty() {
                return;
            }
            seen += 1;
            let s = Sample { node, round, state: state.clone(), inbox: inbox.to_vec() };
            if samples.len() < cap {
                samples.push(s);
            } else {
                let j = pick.gen_range(0..seen);
                if j < cap {
                    samples[j] = s;
                }
            }
        })?;
    }
    let mut report = ContractReport { sampled_pairs: samples.len(), ..Default::default() };
    if samples.is_empty() {
        return Ok(report);
    }
    let mut rng = root.derive("partitions", 0).rng();
    for t in 0..trials {
        let s = &samples[t % samples.len()];
        report.trials += 1;
        let ctx = NodeCtx::new(g, s.node);
        let rand = RandomStream::node_round(seed, s.node, s.round);
        let k = rng.gen_range(1..=s.inbox.len());
        let mut parts: Vec<Vec<(NodeId, Message)>> = (0..k).map(|_| Vec::new()).collect();
        let mut order: Vec<usize> = (0..s.inbox.len()).collect();
        order.shuffle(&mut rng);
        for (i, &idx) in order.iter().enumerate() {
            // The first k messages seed distinct parts so no part is empty.
            let part = if i < k { i } else { rng.gen_range(0..k) };
            parts[part].push(s.inbox[idx]);
        }
        for p in parts.iter_mut() {
            p.sort();
        }
        let mut found = Vec::new();
        let mut aggs = Vec::with_capacity(k);
        for p in &parts {
            let a = contract.aggregate(s.node, s.round, p);
            let words = contract.encoded_words(&a);
            let budget = contract.word_budget(&a);
            report.max_words = report.max_words.max(words);
            if words > budget {
                found.push(ViolationKind::OverBudget { words, budget });
            }
            if a.iter().any(|x| !p.contains(x)) {
                found.push(ViolationKind::NotASubset);
            }
            aggs.push(a);
        }
        let mut full = s.state.clone();
        program.transition(&ctx, &mut full, s.round, &s.inbox, &rand);
        let mut via = s.state.clone();
        program.transition(&ctx, &mut via, s.round, &union_sorted(aggs.clone()), &rand);
        if via != full {
            found.push(ViolationKind::StateMismatch);
        }
        if k >= 2 {
            // agg(agg(M1) ∪ M2) together with the remaining aggregates.
            let mut merged: Vec<(NodeId, Message)> = aggs[0].iter().chain(parts[1].iter()).copied().collect();
            merged.sort();
            merged.dedup();
            let mut comp = Vec::with_capacity(k - 1);
            comp.push(contract.aggregate(s.node, s.round, &merged));
            comp.extend(aggs[2..].iter().cloned());
            let mut composed = s.state.clone();
            program.transition(&ctx, &mut composed, s.round, &union_sorted(comp), &rand);
            if composed != full {
                found.push(ViolationKind::CompositionMismatch);
            }
        }
        report.violations.extend(found.into_iter().map(|kind| ContractViolation {
            node: s.node,
            round: s.round,
            parts: k,
            kind,
        }));
    }
    Ok(report)
}
