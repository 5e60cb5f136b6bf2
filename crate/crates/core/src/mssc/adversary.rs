//! Feedback trees built against a fixed deterministic learner so that its
//! signals never help it, on `n` singleton scenarios with a uniform prior.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

use super::instance::{MsscInstance, Problem};
use super::learners::{
    greedy_buying_learner, run_buying, run_time_dependent, BuyUntilRevealed, BuyingAction, BuyingContext,
    BuyingLearner, CoveringLearner, Greedy, LearnerContext, NoFeedback, NodeAssignment,
};
use super::oracle::{memo_limit, opt_buying_with_limit, opt_time_dependent_with_limit};
use super::MsscError;
use crate::evaluators::Ratio;
use crate::rational::{format_rational, to_f64, Rational};
use crate::tree_model::{Child, CostedFeedbackTree, NodeId, Payload};

type Parts = Vec<(Payload, u64, Vec<Child>)>;

fn push_node(parts: &mut Parts, scenarios: Vec<usize>) -> NodeId {
    parts.push((Payload::Scenarios(scenarios), 1, Vec::new()));
    NodeId(parts.len() - 1)
}

fn attach(parts: &mut Parts, problem: &Problem, parent: NodeId, child: NodeId) {
    let mass = |id: NodeId, parts: &Parts| match &parts[id.0].0 {
        Payload::Scenarios(s) => problem.mass(s),
        Payload::Value(_) => unreachable!("adversarial trees carry scenarios"),
    };
    let prob = mass(child, parts) / mass(parent, parts);
    parts[parent.0].2.push(Child { id: child, prob });
}

fn finish(problem: Problem, parts: Parts) -> Result<MsscInstance, MsscError> {
    let feedback = CostedFeedbackTree::from_parts(parts, NodeId(0)).map_err(|e| MsscError::Invalid(e.to_string()))?;
    MsscInstance::new(problem, feedback)
}

fn check_n(n: usize) -> Result<(), MsscError> {
    if n == 0 || n > 64 {
        return Err(MsscError::Invalid(format!("adversarial constructions need 1 <= n <= 64, got {n}")));
    }
    Ok(())
}

/// Binary caterpillar `v_1, v_2, ...`: `L(v_i)` holds the scenario of the
/// box the learner queries at `v_i`, `R(v_i) = v_{i+1}` the rest.
#[derive(Debug, Clone)]
pub struct TdAdversary {
    pub instance: MsscInstance,
    pub spine: Vec<NodeId>,
    /// `A_i`, the learner's query at `v_i`.
    pub learner_boxes: Vec<usize>,
    /// `L(v_i)`, absent when the query missed every scenario of `v_i`.
    pub left: Vec<Option<NodeId>>,
}

impl TdAdversary {
    /// `A'`: along the spine the learner's order reversed, and at `L(v_i)`
    /// the box of its single scenario.
    pub fn counter_learner(&self) -> NodeAssignment {
        let k = self.learner_boxes.len();
        let mut boxes = HashMap::new();
        for (i, &v) in self.spine.iter().enumerate() {
            boxes.insert(v, self.learner_boxes[k - 1 - i]);
            if let Some(l) = self.left[i] {
                boxes.insert(l, self.learner_boxes[i]);
            }
        }
        NodeAssignment { boxes }
    }
}

pub fn adversarial_feedback_td<L: CoveringLearner + ?Sized>(learner: &L, n: usize) -> Result<TdAdversary, MsscError> {
    check_n(n)?;
    let problem = Problem::singletons(n);
    let mut parts: Parts = Vec::new();
    let mut v = push_node(&mut parts, (0..n).collect());
    let mut spine = Vec::new();
    let mut learner_boxes = Vec::new();
    let mut left = Vec::new();
    let mut alive: Vec<usize> = (0..n).collect();
    let limit = 2 * n + 2;
    loop {
        spine.push(v);
        let ctx = LearnerContext {
            problem: &problem,
            node: v,
            round: learner_boxes.len(),
            queried: &learner_boxes,
            consistent: &alive,
        };
        let a = learner.choose(&ctx);
        if a >= n {
            return Err(MsscError::InvalidAction {
                learner: learner.name().to_string(),
                scenario: alive[0],
                detail: format!("queried box {a} but there are only {n} boxes"),
            });
        }
        learner_boxes.push(a);
        if alive.len() == 1 {
            left.push(None);
            break;
        }
        if learner_boxes.len() > limit {
            return Err(MsscError::Stalled { learner: learner.name().to_string(), scenario: alive[0], steps: limit });
        }
        if alive.contains(&a) {
            let l = push_node(&mut parts, vec![a]);
            attach(&mut parts, &problem, v, l);
            left.push(Some(l));
            alive.retain(|&s| s != a);
        } else {
            left.push(None);
        }
        let r = push_node(&mut parts, alive.clone());
        attach(&mut parts, &problem, v, r);
        v = r;
    }
    Ok(TdAdversary { instance: finish(problem, parts)?, spine, learner_boxes, left })
}

/// Rightmost-spine tree: at `v_i` the learner queries its block `B^i` and
/// buys; every scenario covered by `B^i` becomes its own child and the
/// uncovered rest forms `v_{i+1}`. Signals cost 1.
#[derive(Debug, Clone)]
pub struct BuyAdversary {
    pub instance: MsscInstance,
    pub spine: Vec<NodeId>,
    /// `B^i` in query order.
    pub blocks: Vec<Vec<usize>>,
    /// Scenarios first covered at `v_i`; `n_i` is the length.
    pub newly_covered: Vec<Vec<usize>>,
}

impl BuyAdversary {
    fn n(&self) -> usize {
        self.instance.problem.n_scenarios()
    }

    /// `(1/n)(Σ_{i=1}^n i + Σ_i Σ_{j=1}^{n_i} i − n)`.
    pub fn learner_cost_formula(&self) -> Rational {
        let n = self.n() as i64;
        let mut total = n * (n + 1) / 2 - n;
        for (i, block) in self.newly_covered.iter().enumerate() {
            total += (i as i64 + 1) * block.len() as i64;
        }
        Rational::new(BigInt::from(total), BigInt::from(n))
    }

    /// `(1/n) Σ_{i=1}^n i`.
    pub fn no_feedback_formula(&self) -> Rational {
        let n = self.n() as i64;
        Rational::new(BigInt::from(n + 1), BigInt::from(2))
    }

    /// `1 + (1/n) Σ_i n_i · i`.
    pub fn buy_until_revealed_formula(&self) -> Rational {
        let n = self.n() as i64;
        let mut total = 0i64;
        for (i, block) in self.newly_covered.iter().enumerate() {
            total += (i as i64 + 1) * block.len() as i64;
        }
        Rational::from_integer(BigInt::from(1)) + Rational::new(BigInt::from(total), BigInt::from(n))
    }
}

pub fn adversarial_feedback_buying<L: BuyingLearner + ?Sized>(
    learner: &L,
    n: usize,
) -> Result<BuyAdversary, MsscError> {
    check_n(n)?;
    let problem = Problem::singletons(n);
    let mut parts: Parts = Vec::new();
    let mut v = push_node(&mut parts, (0..n).collect());
    let mut spine = Vec::new();
    let mut blocks = Vec::new();
    let mut newly_covered = Vec::new();
    let mut queried: Vec<usize> = Vec::new();
    let mut alive: Vec<usize> = (0..n).collect();
    let limit = 4 * n + 16;
    loop {
        spine.push(v);
        if spine.len() > limit {
            return Err(MsscError::Stalled { learner: learner.name().to_string(), scenario: alive[0], steps: limit });
        }
        let mut block = Vec::new();
        let mut covered = Vec::new();
        let bought = loop {
            if alive.is_empty() {
                break false;
            }
            if queried.len() > limit {
                return Err(MsscError::Stalled {
                    learner: learner.name().to_string(),
                    scenario: alive[0],
                    steps: limit,
                });
            }
            let ctx = BuyingContext {
                problem: &problem,
                node: v,
                queried: &queried,
                consistent: &alive,
                next_cost: Some(1),
                queries_at_node: block.len(),
                spend: blocks.len() as u64,
            };
            match learner.act(&ctx) {
                BuyingAction::Buy => break true,
                BuyingAction::Query(b) => {
                    if b >= n {
                        return Err(MsscError::InvalidAction {
                            learner: learner.name().to_string(),
                            scenario: alive[0],
                            detail: format!("queried box {b} but there are only {n} boxes"),
                        });
                    }
                    queried.push(b);
                    block.push(b);
                    if let Some(pos) = alive.iter().position(|&s| s == b) {
                        covered.push(alive.remove(pos));
                    }
                }
            }
        };
        for &s in &covered {
            let leaf = push_node(&mut parts, vec![s]);
            attach(&mut parts, &problem, v, leaf);
        }
        blocks.push(block);
        newly_covered.push(covered);
        if !bought {
            break;
        }
        let r = push_node(&mut parts, alive.clone());
        attach(&mut parts, &problem, v, r);
        v = r;
    }
    Ok(BuyAdversary { instance: finish(problem, parts)?, spine, blocks, newly_covered })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryMode {
    Td,
    Buy,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterCost {
    pub learner: String,
    pub cost: String,
    pub cost_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversaryReport {
    pub mode: AdversaryMode,
    pub learner: String,
    pub n: usize,
    /// Expected cover time plus spend, counting the covering query as 1.
    pub learner_cost: String,
    pub learner_cost_value: f64,
    pub counters: Vec<CounterCost>,
    /// Learner over the cheapest counter. Time-dependent costs count cover
    /// time from 0 on both sides; buying costs count from 1.
    pub ratio: Ratio,
    pub ratio_one_indexed: Ratio,
    /// Exact optimum when the state space is small enough.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt: Option<String>,
}

fn ratio_of(num: &Rational, den: &Rational) -> Ratio {
    Ratio::new(to_f64(num), den)
}

pub fn td_report<L: CoveringLearner + ?Sized>(learner: &L, n: usize) -> Result<AdversaryReport, MsscError> {
    let adv = adversarial_feedback_td(learner, n)?;
    let ours = run_time_dependent(&adv.instance, learner)?;
    let theirs = run_time_dependent(&adv.instance, &adv.counter_learner())?;
    let opt = opt_time_dependent_with_limit(&adv.instance, memo_limit()).ok();
    Ok(AdversaryReport {
        mode: AdversaryMode::Td,
        learner: learner.name().to_string(),
        n,
        learner_cost: format_rational(&ours.expected_cost),
        learner_cost_value: to_f64(&ours.expected_cost),
        counters: vec![CounterCost {
            learner: "reversed-order".into(),
            cost: format_rational(&theirs.expected_cost),
            cost_value: to_f64(&theirs.expected_cost),
        }],
        ratio: ratio_of(&ours.zero_indexed_cover_time(), &theirs.zero_indexed_cover_time()),
        ratio_one_indexed: ratio_of(&ours.expected_cost, &theirs.expected_cost),
        opt: opt.map(|o| format_rational(&o)),
    })
}

pub fn buy_report<L: BuyingLearner + ?Sized>(learner: &L, n: usize) -> Result<AdversaryReport, MsscError> {
    let adv = adversarial_feedback_buying(learner, n)?;
    let ours = run_buying(&adv.instance, learner)?;
    let mut counters = Vec::new();
    let mut best: Option<Rational> = None;
    for counter in [&NoFeedback as &dyn BuyingLearner, &BuyUntilRevealed] {
        let cost = run_buying(&adv.instance, counter)?.expected_cost;
        if best.as_ref().is_none_or(|b| cost < *b) {
            best = Some(cost.clone());
        }
        counters.push(CounterCost {
            learner: counter.name().to_string(),
            cost: format_rational(&cost),
            cost_value: to_f64(&cost),
        });
    }
    let best = best.unwrap_or_else(Rational::zero);
    let opt = opt_buying_with_limit(&adv.instance, memo_limit()).ok();
    let ratio = ratio_of(&ours.expected_cost, &best);
    Ok(AdversaryReport {
        mode: AdversaryMode::Buy,
        learner: learner.name().to_string(),
        n,
        learner_cost: format_rational(&ours.expected_cost),
        learner_cost_value: to_f64(&ours.expected_cost),
        counters,
        ratio,
        ratio_one_indexed: ratio,
        opt: opt.map(|o| format_rational(&o)),
    })
}

pub const TD_LEARNERS: &[&str] = &["greedy"];
pub const BUY_LEARNERS: &[&str] = &["greedy-buy", "no-feedback", "buy-until-revealed"];

pub fn covering_learner(name: &str) -> Option<Box<dyn CoveringLearner>> {
    match name {
        "greedy" => Some(Box::new(Greedy)),
        _ => None,
    }
}

pub fn buying_learner(name: &str) -> Option<Box<dyn BuyingLearner>> {
    match name {
        "greedy-buy" => Some(Box::new(greedy_buying_learner())),
        "no-feedback" => Some(Box::new(NoFeedback)),
        "buy-until-revealed" => Some(Box::new(BuyUntilRevealed)),
        _ => None,
    }
}
