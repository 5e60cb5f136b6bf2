//! Learner interfaces and the drivers that run them scenario by scenario.
//!
//! A learner only sees the [`Problem`], an opaque handle to the feedback
//! received so far (the current feedback node), its own queries (all of
//! which came back zero, or it would have stopped) and the consistent set.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use super::instance::{MsscInstance, Problem};
use super::MsscError;
use crate::rational::Rational;
use crate::tree_model::NodeId;

#[derive(Debug, Clone, Copy)]
pub struct LearnerContext<'a> {
    pub problem: &'a Problem,
    pub node: NodeId,
    /// Queries made so far.
    pub round: usize,
    pub queried: &'a [usize],
    /// `S_t`: scenarios of the current node with zeros at every queried box.
    pub consistent: &'a [usize],
}

/// Time-dependent learner: one free signal per round, one query per round.
pub trait CoveringLearner {
    fn name(&self) -> &str;
    fn choose(&self, ctx: &LearnerContext<'_>) -> usize;
}

#[derive(Debug, Clone, Copy)]
pub struct BuyingContext<'a> {
    pub problem: &'a Problem,
    pub node: NodeId,
    pub queried: &'a [usize],
    pub consistent: &'a [usize],
    /// Price of the next signal; `None` once no further signal exists.
    pub next_cost: Option<u64>,
    /// Queries made since the last purchase.
    pub queries_at_node: usize,
    pub spend: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuyingAction {
    Query(usize),
    Buy,
}

pub trait BuyingLearner {
    fn name(&self) -> &str;
    fn act(&self, ctx: &BuyingContext<'_>) -> BuyingAction;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum Action {
    Query { box_index: usize, covered: bool },
    Buy { cost: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LearnerTrace {
    pub scenario: usize,
    pub actions: Vec<Action>,
    /// 1-indexed position of the covering query.
    pub cover_time: usize,
    pub feedback_spend: u64,
}

impl LearnerTrace {
    pub fn total_cost(&self) -> u64 {
        self.cover_time as u64 + self.feedback_spend
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub expected_cost: Rational,
    pub expected_cover_time: Rational,
    pub expected_spend: Rational,
    /// Indexed by scenario.
    pub traces: Vec<LearnerTrace>,
}

impl Evaluation {
    pub fn from_traces(problem: &Problem, traces: Vec<LearnerTrace>) -> Self {
        let mut cover = Rational::zero();
        let mut spend = Rational::zero();
        for t in &traces {
            let p = &problem.prior[t.scenario];
            cover += p * Rational::from_integer(BigInt::from(t.cover_time));
            spend += p * Rational::from_integer(BigInt::from(t.feedback_spend));
        }
        Self { expected_cost: &cover + &spend, expected_cover_time: cover, expected_spend: spend, traces }
    }

    /// `E[cover_time - 1]`: cover time counted from zero.
    pub fn zero_indexed_cover_time(&self) -> Rational {
        &self.expected_cover_time - Rational::from_integer(BigInt::from(1))
    }
}

/// Upper bound on learner steps for one scenario.
fn step_limit(inst: &MsscInstance) -> usize {
    (inst.feedback.horizon() + 2) * (inst.problem.n_boxes + 1)
}

fn queried_mask(queried: &[usize]) -> u64 {
    queried.iter().fold(0u64, |m, &b| m | 1 << b)
}

fn check_box(inst: &MsscInstance, learner: &str, scenario: usize, b: usize) -> Result<(), MsscError> {
    if b >= inst.problem.n_boxes {
        return Err(MsscError::InvalidAction {
            learner: learner.to_string(),
            scenario,
            detail: format!("queried box {b} but there are only {} boxes", inst.problem.n_boxes),
        });
    }
    Ok(())
}

/// Runs a time-dependent learner: query `k` (from 1) is made at the node of
/// depth `k - 1` on the scenario's path; a leaf repeats itself.
pub fn run_time_dependent<L: CoveringLearner + ?Sized>(
    inst: &MsscInstance,
    learner: &L,
) -> Result<Evaluation, MsscError> {
    let limit = step_limit(inst);
    let mut traces = Vec::with_capacity(inst.problem.n_scenarios());
    for s in 0..inst.problem.n_scenarios() {
        let mut node = inst.feedback.root();
        let mut queried = Vec::new();
        let mut actions = Vec::new();
        loop {
            let consistent = inst.problem.uncovered(inst.scenarios_at(node), queried_mask(&queried));
            let ctx = LearnerContext {
                problem: &inst.problem,
                node,
                round: queried.len(),
                queried: &queried,
                consistent: &consistent,
            };
            let b = learner.choose(&ctx);
            check_box(inst, learner.name(), s, b)?;
            queried.push(b);
            let covered = inst.problem.has_one(s, b);
            actions.push(Action::Query { box_index: b, covered });
            if covered {
                break;
            }
            if queried.len() >= limit {
                return Err(MsscError::Stalled { learner: learner.name().to_string(), scenario: s, steps: limit });
            }
            if let Some(next) = inst.child_containing(node, s) {
                node = next;
            }
        }
        traces.push(LearnerTrace { scenario: s, cover_time: queried.len(), feedback_spend: 0, actions });
    }
    Ok(Evaluation::from_traces(&inst.problem, traces))
}

/// Runs a buying learner; signals cost the price stored on the node being
/// left.
pub fn run_buying<L: BuyingLearner + ?Sized>(inst: &MsscInstance, learner: &L) -> Result<Evaluation, MsscError> {
    let limit = step_limit(inst);
    let mut traces = Vec::with_capacity(inst.problem.n_scenarios());
    for s in 0..inst.problem.n_scenarios() {
        let mut node = inst.feedback.root();
        let mut queried: Vec<usize> = Vec::new();
        let mut actions = Vec::new();
        let mut at_node = 0usize;
        let mut spend = 0u64;
        loop {
            if actions.len() >= limit {
                return Err(MsscError::Stalled { learner: learner.name().to_string(), scenario: s, steps: limit });
            }
            let fb = inst.feedback.node(node);
            let consistent = inst.problem.uncovered(inst.scenarios_at(node), queried_mask(&queried));
            let ctx = BuyingContext {
                problem: &inst.problem,
                node,
                queried: &queried,
                consistent: &consistent,
                next_cost: (!fb.is_leaf()).then_some(fb.cost),
                queries_at_node: at_node,
                spend,
            };
            match learner.act(&ctx) {
                BuyingAction::Query(b) => {
                    check_box(inst, learner.name(), s, b)?;
                    queried.push(b);
                    at_node += 1;
                    let covered = inst.problem.has_one(s, b);
                    actions.push(Action::Query { box_index: b, covered });
                    if covered {
                        break;
                    }
                }
                BuyingAction::Buy => {
                    let next = inst.child_containing(node, s).ok_or_else(|| MsscError::InvalidAction {
                        learner: learner.name().to_string(),
                        scenario: s,
                        detail: format!("tried to buy a signal at leaf {node}"),
                    })?;
                    spend += fb.cost;
                    actions.push(Action::Buy { cost: fb.cost });
                    node = next;
                    at_node = 0;
                }
            }
        }
        traces.push(LearnerTrace { scenario: s, cover_time: queried.len(), feedback_spend: spend, actions });
    }
    Ok(Evaluation::from_traces(&inst.problem, traces))
}

/// The box with the largest consistent mass; ties go to the lowest index.
pub fn greedy_box(problem: &Problem, consistent: &[usize]) -> usize {
    let mut mass = vec![Rational::zero(); problem.n_boxes];
    for &s in consistent {
        let mut bits = problem.scenarios[s];
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            mass[b] += &problem.prior[s];
            bits &= bits - 1;
        }
    }
    let mut best = 0;
    for b in 1..problem.n_boxes {
        if mass[b] > mass[best] {
            best = b;
        }
    }
    best
}

/// Queries the box most likely to cover the consistent scenarios.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl CoveringLearner for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn choose(&self, ctx: &LearnerContext<'_>) -> usize {
        greedy_box(ctx.problem, ctx.consistent)
    }
}

/// Turns a time-dependent learner into a buying learner: at a node whose
/// next signal costs `c`, take `c` actions of the inner learner, then buy.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reduction<L> {
    pub inner: L,
    name: &'static str,
}

impl<L> Reduction<L> {
    pub fn new(inner: L, name: &'static str) -> Self {
        Self { inner, name }
    }
}

/// Greedy wrapped by [`Reduction`]; behaves exactly like
/// [`super::greedy_buying`].
pub fn greedy_buying_learner() -> Reduction<Greedy> {
    Reduction::new(Greedy, "greedy-buy")
}

impl<L: CoveringLearner> BuyingLearner for Reduction<L> {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&self, ctx: &BuyingContext<'_>) -> BuyingAction {
        if let Some(cost) = ctx.next_cost {
            if ctx.queries_at_node as u64 >= cost {
                return BuyingAction::Buy;
            }
        }
        let inner = LearnerContext {
            problem: ctx.problem,
            node: ctx.node,
            round: ctx.queried.len(),
            queried: ctx.queried,
            consistent: ctx.consistent,
        };
        BuyingAction::Query(self.inner.choose(&inner))
    }
}

/// Never buys; queries greedily.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoFeedback;

impl BuyingLearner for NoFeedback {
    fn name(&self) -> &str {
        "no-feedback"
    }

    fn act(&self, ctx: &BuyingContext<'_>) -> BuyingAction {
        BuyingAction::Query(greedy_box(ctx.problem, ctx.consistent))
    }
}

/// Buys until a single scenario remains (or signals run out), then queries
/// greedily.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuyUntilRevealed;

impl BuyingLearner for BuyUntilRevealed {
    fn name(&self) -> &str {
        "buy-until-revealed"
    }

    fn act(&self, ctx: &BuyingContext<'_>) -> BuyingAction {
        if ctx.consistent.len() > 1 && ctx.next_cost.is_some() {
            BuyingAction::Buy
        } else {
            BuyingAction::Query(greedy_box(ctx.problem, ctx.consistent))
        }
    }
}

/// Fixed box per feedback node, falling back to greedy elsewhere. Offline
/// benchmarks such as the counter-learner of the adversarial construction
/// are of this form.
#[derive(Debug, Clone, Default)]
pub struct NodeAssignment {
    pub boxes: HashMap<NodeId, usize>,
}

impl CoveringLearner for NodeAssignment {
    fn name(&self) -> &str {
        "node-assignment"
    }

    fn choose(&self, ctx: &LearnerContext<'_>) -> usize {
        match self.boxes.get(&ctx.node) {
            Some(&b) if !ctx.queried.contains(&b) => b,
            _ => greedy_box(ctx.problem, ctx.consistent),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mssc::instance::FeedbackSpec;
    use crate::rational::{int, ratio};

    fn flat(n: usize) -> MsscInstance {
        MsscInstance::without_feedback(Problem::singletons(n)).unwrap()
    }

    struct Fixed(usize);

    impl CoveringLearner for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn choose(&self, _: &LearnerContext<'_>) -> usize {
            self.0
        }
    }

    struct AlwaysBuy;

    impl BuyingLearner for AlwaysBuy {
        fn name(&self) -> &str {
            "always-buy"
        }
        fn act(&self, _: &BuyingContext<'_>) -> BuyingAction {
            BuyingAction::Buy
        }
    }

    #[test]
    fn greedy_flat_singletons() {
        let eval = run_time_dependent(&flat(3), &Greedy).unwrap();
        assert_eq!(eval.expected_cost, int(2));
        assert_eq!(eval.traces[2].actions.len(), 3);
        assert_eq!(eval.traces[0].cover_time, 1);
    }

    #[test]
    fn single_scenario_costs_one() {
        let inst = MsscInstance::without_feedback(Problem::singletons(1)).unwrap();
        assert_eq!(run_time_dependent(&inst, &Greedy).unwrap().expected_cost, int(1));
        let eval = run_buying(&inst, &greedy_buying_learner()).unwrap();
        assert_eq!(eval.expected_cost, int(1));
        assert_eq!(eval.expected_spend, int(0));
    }

    #[test]
    fn invalid_and_stalled_learners_are_reported() {
        assert!(matches!(run_time_dependent(&flat(2), &Fixed(7)), Err(MsscError::InvalidAction { .. })));
        assert!(matches!(run_time_dependent(&flat(2), &Fixed(0)), Err(MsscError::Stalled { .. })));
        assert!(matches!(run_buying(&flat(2), &AlwaysBuy), Err(MsscError::InvalidAction { .. })));
    }

    #[test]
    fn ignoring_feedback_adds_spend() {
        // Learner ignores signals but the wrapper still buys them.
        let spec =
            FeedbackSpec::node(vec![0, 1, 2], 2, vec![FeedbackSpec::leaf(vec![0]), FeedbackSpec::leaf(vec![1, 2])]);
        let inst = MsscInstance::from_nested(Problem::singletons(3), spec).unwrap();
        struct Order;
        impl CoveringLearner for Order {
            fn name(&self) -> &str {
                "order"
            }
            fn choose(&self, ctx: &LearnerContext<'_>) -> usize {
                ctx.round
            }
        }
        let plain =
            run_time_dependent(&MsscInstance::without_feedback(Problem::singletons(3)).unwrap(), &Order).unwrap();
        let wrapped = run_buying(&inst, &Reduction::new(Order, "order")).unwrap();
        let mut expected_spend = Rational::zero();
        for (t, p) in wrapped.traces.iter().zip(&plain.traces) {
            assert_eq!(t.cover_time, p.cover_time);
            expected_spend += ratio(1, 3) * int(t.feedback_spend as i64);
        }
        assert_eq!(wrapped.expected_cost, plain.expected_cost + expected_spend);
        assert_eq!(wrapped.traces[2].feedback_spend, 2);
    }

    #[test]
    fn node_assignment_falls_back_to_greedy() {
        let mut assign = NodeAssignment::default();
        assign.boxes.insert(NodeId(0), 2);
        let eval = run_time_dependent(&flat(3), &assign).unwrap();
        assert_eq!(eval.traces[2].cover_time, 1);
        assert_eq!(eval.expected_cost, int(2));
    }
}
