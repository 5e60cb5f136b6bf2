//! Exact expectations over the finite tree.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::rational::{format_rational, min_rational, to_f64, Rational};
use crate::stopping_policies::{
    ClassicSkiRental, Decision, DeterministicStopping, PolicyKind, RevisedSkiRental, StoppingPolicy, ThrowCoin,
};
use crate::tree_model::{CostedFeedbackTree, InstanceTree, NodeId};

use super::EvalError;

fn depth_rational(depth: usize) -> Rational {
    Rational::from_integer(BigInt::from(depth))
}

/// Offline optimum together with the optimal stopping-node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptSolution {
    pub value: Rational,
    /// `OPT` of the subtree at each node, in cost units relative to that node.
    pub subtree_values: Vec<Rational>,
    /// Nodes where the optimal rule stops; every root-to-leaf path meets
    /// exactly one.
    pub stopping_set: Vec<NodeId>,
}

/// `OPT(T) = min{v, 1 + Σ Pr(child) OPT(child)}`, ties broken toward stopping.
pub fn opt_dp(tree: &InstanceTree) -> OptSolution {
    let order = tree.preorder();
    let mut values = vec![Rational::zero(); tree.len()];
    let mut stops = vec![false; tree.len()];
    for &id in order.iter().rev() {
        let node = tree.node(id);
        if node.is_leaf() {
            values[id.0] = node.value.clone();
            stops[id.0] = true;
            continue;
        }
        let cont: Rational =
            Rational::one() + node.children.iter().map(|c| &c.prob * &values[c.id.0]).sum::<Rational>();
        stops[id.0] = node.value <= cont;
        values[id.0] = if stops[id.0] { node.value.clone() } else { cont };
    }

    let mut stopping_set = Vec::new();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        if stops[id.0] {
            stopping_set.push(id);
        } else {
            stack.extend(tree.node(id).children.iter().map(|c| c.id));
        }
    }
    stopping_set.sort();

    OptSolution { value: values[tree.root().0].clone(), subtree_values: values, stopping_set }
}

/// Optimum when moving past a node costs its edge price rather than 1.
/// Requires a value payload on every node.
pub fn opt_dp_costed(tree: &CostedFeedbackTree) -> Result<Rational, EvalError> {
    fn go(tree: &CostedFeedbackTree, id: NodeId) -> Result<Rational, EvalError> {
        let node = tree.node(id);
        let value = node.value().ok_or(EvalError::NotAValueTree(id))?;
        if node.is_leaf() {
            return Ok(value.clone());
        }
        let mut cont = Rational::from_integer(BigInt::from(node.cost));
        for child in &node.children {
            cont += &child.prob * go(tree, child.id)?;
        }
        Ok(min_rational(value, &cont).clone())
    }
    go(tree, tree.root())
}

/// `E min_i (i + X_i)`: the per-realization best stop.
pub fn prophet_value(tree: &InstanceTree) -> Rational {
    let mut total = Rational::zero();
    let mut stack = vec![(tree.root(), Rational::one(), None::<Rational>)];
    while let Some((id, reach, best)) = stack.pop() {
        let node = tree.node(id);
        let here = depth_rational(node.depth) + &node.value;
        let best = match best {
            Some(b) if b <= here => b,
            _ => here,
        };
        if node.is_leaf() {
            total += reach * best;
            continue;
        }
        for child in &node.children {
            stack.push((child.id, &reach * &child.prob, Some(best.clone())));
        }
    }
    total
}

/// Expected cost of a policy whose decisions depend only on the observed
/// prefix; the policy state is cloned at every branch.
pub fn exact_policy_cost<P: StoppingPolicy + Clone>(tree: &InstanceTree, policy: P) -> Rational {
    let mut total = Rational::zero();
    let mut stack = vec![(tree.root(), Rational::one(), policy)];
    while let Some((id, reach, mut policy)) = stack.pop() {
        let node = tree.node(id);
        if policy.observe(&node.value) == Decision::Stop || node.is_leaf() {
            total += reach * (depth_rational(node.depth) + &node.value);
            continue;
        }
        for child in &node.children {
            stack.push((child.id, &reach * &child.prob, policy.clone()));
        }
    }
    total
}

/// [`exact_policy_cost`] dispatched by name; only deterministic policies.
pub fn exact_deterministic_cost(tree: &InstanceTree, kind: PolicyKind) -> Result<Rational, EvalError> {
    match kind {
        PolicyKind::Det => Ok(exact_policy_cost(tree, DeterministicStopping::new())),
        PolicyKind::Ski => Ok(exact_policy_cost(tree, ClassicSkiRental::new())),
        PolicyKind::SkiMin => Ok(exact_policy_cost(tree, RevisedSkiRental::new())),
        PolicyKind::Rand | PolicyKind::Coin => Err(EvalError::NotDeterministic(kind)),
    }
}

/// `Σ q_k (e^{b_k} - e^{a_k}) / (e - 1)` with rational `q_k, a_k <= b_k`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpIntegral {
    terms: Vec<ExpTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpTerm {
    pub coefficient: Rational,
    pub lo: Rational,
    pub hi: Rational,
}

impl ExpIntegral {
    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn push(&mut self, coefficient: Rational, lo: Rational, hi: Rational) {
        debug_assert!(lo <= hi);
        if coefficient.is_zero() || lo == hi {
            return;
        }
        self.terms.push(ExpTerm { coefficient, lo, hi });
    }

    /// Each term is computed as `q e^a expm1(b - a)` to avoid cancellation,
    /// then summed with Neumaier compensation.
    pub fn to_f64(&self) -> f64 {
        let scale = 1.0 / (std::f64::consts::E - 1.0);
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        for term in &self.terms {
            let a = to_f64(&term.lo);
            let width = to_f64(&(&term.hi - &term.lo));
            let x = to_f64(&term.coefficient) * a.exp() * width.exp_m1() * scale;
            let t = sum + x;
            if sum.abs() >= x.abs() {
                carry += (sum - t) + x;
            } else {
                carry += (x - t) + sum;
            }
            sum = t;
        }
        sum + carry
    }
}

impl fmt::Display for ExpIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(
                f,
                "{}*(e^({}) - e^({}))/(e-1)",
                format_rational(&t.coefficient),
                format_rational(&t.hi),
                format_rational(&t.lo)
            )?;
        }
        Ok(())
    }
}

/// An exact expected cost: rational for every policy except `rand`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactCost {
    Rational(Rational),
    Exp(ExpIntegral),
}

impl ExactCost {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExactCost::Rational(r) => to_f64(r),
            ExactCost::Exp(e) => e.to_f64(),
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            ExactCost::Rational(r) => Some(r),
            ExactCost::Exp(_) => None,
        }
    }
}

impl fmt::Display for ExactCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactCost::Rational(r) => f.write_str(&format_rational(r)),
            ExactCost::Exp(e) => e.fmt(f),
        }
    }
}

/// Expected cost of the random-threshold rule integrated over `ρ`.
///
/// At a node of depth `i` reached with `Q(i) = a`, the rule stops for
/// `ρ ∈ [a, b]` where `b = Q(i+1)`, taken as `+∞` at a leaf or a zero value;
/// both ends are clipped to `[0, 1]`.
pub fn randomized_threshold_cost(tree: &InstanceTree) -> ExpIntegral {
    let one = Rational::one();
    let mut integral = ExpIntegral::default();
    let mut stack = vec![(tree.root(), Rational::one(), Rational::zero())];
    while let Some((id, reach, a)) = stack.pop() {
        let node = tree.node(id);
        let end = if node.is_leaf() || node.value.is_zero() { None } else { Some(&a + node.value.recip()) };
        let hi = match &end {
            Some(b) if *b < one => b.clone(),
            _ => one.clone(),
        };
        let payment = depth_rational(node.depth) + &node.value;
        integral.push(&reach * payment, a.clone(), hi.clone());
        if let Some(b) = end.filter(|b| *b < one) {
            for child in &node.children {
                stack.push((child.id, &reach * &child.prob, b.clone()));
            }
        }
    }
    integral
}

/// `C(v) = p v + (1 - p)(1 + Σ Pr(c) C(c))` with `p = min{1, 1/v}`.
pub fn throw_coin_cost(tree: &InstanceTree) -> Rational {
    let order = tree.preorder();
    let mut cost = vec![Rational::zero(); tree.len()];
    for &id in order.iter().rev() {
        let node = tree.node(id);
        cost[id.0] = if node.is_leaf() {
            node.value.clone()
        } else {
            let p = ThrowCoin::stop_probability(&node.value);
            let cont: Rational =
                Rational::one() + node.children.iter().map(|c| &c.prob * &cost[c.id.0]).sum::<Rational>();
            &p * &node.value + (Rational::one() - &p) * cont
        };
    }
    cost[tree.root().0].clone()
}

/// Exact expected cost of a randomized policy, integrated over its coins.
pub fn exact_randomized_cost(tree: &InstanceTree, kind: PolicyKind) -> Result<ExactCost, EvalError> {
    match kind {
        PolicyKind::Rand => Ok(ExactCost::Exp(randomized_threshold_cost(tree))),
        PolicyKind::Coin => Ok(ExactCost::Rational(throw_coin_cost(tree))),
        _ => Err(EvalError::NotRandomized(kind)),
    }
}

/// Exact expected cost of any built-in policy.
pub fn exact_cost(tree: &InstanceTree, kind: PolicyKind) -> ExactCost {
    if kind.is_deterministic() {
        ExactCost::Rational(exact_deterministic_cost(tree, kind).expect("deterministic policy"))
    } else {
        exact_randomized_cost(tree, kind).expect("randomized policy")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::stopping_policies::{walk, RandomizedStopping};
    use crate::tree_model::TreeBuilder;

    fn one_step(root: i64, a: i64, b: i64) -> InstanceTree {
        let mut t = TreeBuilder::new();
        let r = t.add(int(root));
        t.add_child(r, int(a), ratio(1, 2));
        t.add_child(r, int(b), ratio(1, 2));
        t.build(r).unwrap()
    }

    #[test]
    fn opt_examples() {
        assert_eq!(opt_dp(&InstanceTree::leaf(int(7))).value, int(7));
        let sol = opt_dp(&one_step(1, 0, 3));
        assert_eq!(sol.value, int(1));
        assert_eq!(sol.stopping_set, vec![NodeId(0)]);
        let sol = opt_dp(&one_step(3, 0, 3));
        assert_eq!(sol.value, ratio(5, 2));
        assert_eq!(sol.stopping_set, vec![NodeId(1), NodeId(2)]);
    }

    #[test]
    fn opt_ties_stop() {
        // 2 = 1 + (1/2)(0 + 2): tie at the root.
        let sol = opt_dp(&one_step(2, 0, 2));
        assert_eq!(sol.value, int(2));
        assert_eq!(sol.stopping_set, vec![NodeId(0)]);
    }

    #[test]
    fn prophet_examples() {
        assert_eq!(prophet_value(&InstanceTree::leaf(int(3))), int(3));
        assert_eq!(prophet_value(&InstanceTree::chain(&[int(5), int(0)])), int(1));
        // Paths (3, 0) and (3, 3): min(3, 1) and min(3, 4).
        assert_eq!(prophet_value(&one_step(3, 0, 3)), int(2));
    }

    #[test]
    fn costed_opt_matches_unit_opt() {
        let tree = one_step(3, 0, 3);
        let unit = CostedFeedbackTree::from_instance_tree(&tree, |_| 1);
        assert_eq!(opt_dp_costed(&unit).unwrap(), opt_dp(&tree).value);
        let pricey = CostedFeedbackTree::from_instance_tree(&tree, |_| 2);
        assert_eq!(opt_dp_costed(&pricey).unwrap(), int(3));
    }

    #[test]
    fn policy_cost_single_node() {
        for kind in PolicyKind::ALL {
            assert_eq!(exact_cost(&InstanceTree::leaf(int(4)), kind).to_f64(), 4.0);
        }
    }

    #[test]
    fn coin_two_outcomes() {
        let tree = InstanceTree::chain(&[int(4), int(0)]);
        assert_eq!(throw_coin_cost(&tree), ratio(7, 4));
    }

    #[test]
    fn rand_constant_chain() {
        let cost = randomized_threshold_cost(&InstanceTree::chain(&[int(1), int(1)]));
        assert!((cost.to_f64() - 1.0).abs() < 1e-15);
        assert_eq!(cost.terms().len(), 1);
    }

    /// Numerical quadrature over ρ of the literal walk.
    fn rand_by_quadrature(tree: &InstanceTree, steps: usize) -> f64 {
        let mut total = 0.0;
        let reach = tree.reach_probabilities();
        let leaves: Vec<NodeId> = tree.ids().filter(|&id| tree.node(id).is_leaf()).collect();
        let paths: Vec<(f64, Vec<Rational>)> = leaves
            .iter()
            .map(|&leaf| {
                let mut ids = vec![leaf];
                while *ids.last().unwrap() != tree.root() {
                    let at = *ids.last().unwrap();
                    let parent = tree.ids().find(|&p| tree.node(p).children.iter().any(|c| c.id == at)).unwrap();
                    ids.push(parent);
                }
                ids.reverse();
                (to_f64(&reach[leaf.0]), ids.iter().map(|&i| tree.node(i).value.clone()).collect())
            })
            .collect();
        for k in 0..steps {
            let rho = (k as f64 + 0.5) / steps as f64;
            let weight = rho.exp() / (std::f64::consts::E - 1.0) / steps as f64;
            let rho = crate::rational::from_f64(rho).unwrap();
            for (p, path) in &paths {
                let out = walk(RandomizedStopping::with_threshold(rho.clone()), path);
                total += p * weight * to_f64(&out.cost());
            }
        }
        total
    }

    #[test]
    fn rand_closed_form_matches_quadrature() {
        let mut t = TreeBuilder::new();
        let r = t.add(int(3));
        let a = t.add_child(r, int(2), ratio(1, 3));
        t.add_child(r, int(4), ratio(2, 3));
        t.add_child(a, int(0), ratio(1, 2));
        t.add_child(a, int(4), ratio(1, 2));
        let tree = t.build(r).unwrap();
        let exact = randomized_threshold_cost(&tree).to_f64();
        let approx = rand_by_quadrature(&tree, 20_000);
        assert!((exact - approx).abs() < 1e-3, "{exact} vs {approx}");
    }

    #[test]
    fn exp_integral_display() {
        let mut e = ExpIntegral::default();
        assert_eq!(e.to_string(), "0");
        e.push(int(2), int(0), int(1));
        assert_eq!(e.to_string(), "2/1*(e^(1/1) - e^(0/1))/(e-1)");
        assert!((e.to_f64() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dispatch_rejects_wrong_family() {
        let tree = InstanceTree::leaf(int(1));
        assert!(exact_deterministic_cost(&tree, PolicyKind::Rand).is_err());
        assert!(exact_randomized_cost(&tree, PolicyKind::Det).is_err());
    }
}
