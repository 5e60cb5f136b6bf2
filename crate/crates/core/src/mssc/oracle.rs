//! Exact offline optima by dynamic programming over (feedback node, set of
//! queried boxes). Exponential in the number of boxes; guarded by a bound on
//! the number of memo entries.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Zero;

use super::instance::MsscInstance;
use super::MsscError;
use crate::rational::Rational;
use crate::tree_model::NodeId;

pub const DEFAULT_MEMO_LIMIT: u64 = 20_000_000;
pub const MEMO_LIMIT_ENV: &str = "STOPWISE_MEMO_LIMIT";

/// The memo bound, overridable through `STOPWISE_MEMO_LIMIT`.
pub fn memo_limit() -> u64 {
    std::env::var(MEMO_LIMIT_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MEMO_LIMIT)
}

fn check_state_space(inst: &MsscInstance, limit: u64) -> Result<(), MsscError> {
    let n = inst.problem.n_boxes;
    let states = if n >= 63 { None } else { (inst.feedback.len() as u64).checked_mul(1u64 << n) };
    match states {
        Some(s) if s <= limit => Ok(()),
        _ => Err(MsscError::StateSpace { nodes: inst.feedback.len(), boxes: n, limit }),
    }
}

struct Memo<'a> {
    inst: &'a MsscInstance,
    table: HashMap<(NodeId, u64), Rational>,
}

impl Memo<'_> {
    fn uncovered(&self, node: NodeId, queried: u64) -> Vec<usize> {
        self.inst.problem.uncovered(self.inst.scenarios_at(node), queried)
    }

    fn unqueried(&self, queried: u64) -> impl Iterator<Item = usize> {
        (0..self.inst.problem.n_boxes).filter(move |b| queried >> b & 1 == 0)
    }

    /// `cost(v, Q) = mass(U) + min_b Σ_u cost(u, Q ∪ {b})`, a leaf being its
    /// own single child.
    fn time_dependent(&mut self, node: NodeId, queried: u64) -> Rational {
        if let Some(v) = self.table.get(&(node, queried)) {
            return v.clone();
        }
        let uncovered = self.uncovered(node, queried);
        let value = if uncovered.is_empty() {
            Rational::zero()
        } else {
            let children: Vec<NodeId> = {
                let fb = self.inst.feedback.node(node);
                if fb.is_leaf() {
                    vec![node]
                } else {
                    fb.children.iter().map(|c| c.id).collect()
                }
            };
            let mut best: Option<Rational> = None;
            for b in self.unqueried(queried).collect::<Vec<_>>() {
                let next = queried | 1 << b;
                let total: Rational = children.iter().map(|&u| self.time_dependent(u, next)).sum();
                if best.as_ref().is_none_or(|v| total < *v) {
                    best = Some(total);
                }
            }
            self.inst.problem.mass(&uncovered) + best.expect("an uncovered scenario leaves a box unqueried")
        };
        self.table.insert((node, queried), value.clone());
        value
    }

    /// `value(v, Q) = min{ min_b [mass(U) + value(v, Q ∪ {b})],
    ///                     mass(U)·c_v + Σ_u value(u, Q) }`.
    fn buying(&mut self, node: NodeId, queried: u64) -> Rational {
        if let Some(v) = self.table.get(&(node, queried)) {
            return v.clone();
        }
        let uncovered = self.uncovered(node, queried);
        let value = if uncovered.is_empty() {
            Rational::zero()
        } else {
            let mass = self.inst.problem.mass(&uncovered);
            let mut best: Option<Rational> = None;
            for b in self.unqueried(queried).collect::<Vec<_>>() {
                let total = &mass + self.buying(node, queried | 1 << b);
                if best.as_ref().is_none_or(|v| total < *v) {
                    best = Some(total);
                }
            }
            let (cost, children): (u64, Vec<NodeId>) = {
                let fb = self.inst.feedback.node(node);
                (fb.cost, fb.children.iter().map(|c| c.id).collect())
            };
            if !children.is_empty() {
                let mut total = &mass * Rational::from_integer(BigInt::from(cost));
                for u in children {
                    total += self.buying(u, queried);
                }
                if best.as_ref().is_none_or(|v| total < *v) {
                    best = Some(total);
                }
            }
            best.expect("an uncovered scenario leaves a box unqueried")
        };
        self.table.insert((node, queried), value.clone());
        value
    }
}

/// Best expected cover time of a learner that knows the feedback tree and
/// receives one free signal per round.
pub fn opt_time_dependent(inst: &MsscInstance) -> Result<Rational, MsscError> {
    opt_time_dependent_with_limit(inst, memo_limit())
}

pub fn opt_time_dependent_with_limit(inst: &MsscInstance, limit: u64) -> Result<Rational, MsscError> {
    check_state_space(inst, limit)?;
    let mut memo = Memo { inst, table: HashMap::new() };
    Ok(memo.time_dependent(inst.feedback.root(), 0))
}

/// Best expected cover time plus feedback spend when signals are bought.
pub fn opt_buying(inst: &MsscInstance) -> Result<Rational, MsscError> {
    opt_buying_with_limit(inst, memo_limit())
}

pub fn opt_buying_with_limit(inst: &MsscInstance, limit: u64) -> Result<Rational, MsscError> {
    check_state_space(inst, limit)?;
    let mut memo = Memo { inst, table: HashMap::new() };
    Ok(memo.buying(inst.feedback.root(), 0))
}
