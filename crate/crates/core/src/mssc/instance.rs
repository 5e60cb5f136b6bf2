//! Min-sum set cover instances with a feedback tree over scenario subsets.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MsscError;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::tree_model::{normalize_costs, Child, CostedFeedbackTree, NodeId, NormalizedTree, Payload};

/// Boxes, scenarios and prior; everything the learner knows up front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub n_boxes: usize,
    /// Bit `b` of `scenarios[s]` is `s_b`.
    pub scenarios: Vec<u64>,
    pub prior: Vec<Rational>,
}

impl Problem {
    pub fn n_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn has_one(&self, scenario: usize, box_index: usize) -> bool {
        self.scenarios[scenario] >> box_index & 1 == 1
    }

    /// Scenarios in `set` with a zero at every box in `queried`.
    pub fn uncovered(&self, set: &[usize], queried: u64) -> Vec<usize> {
        set.iter().copied().filter(|&s| self.scenarios[s] & queried == 0).collect()
    }

    pub fn mass(&self, set: &[usize]) -> Rational {
        set.iter().map(|&s| &self.prior[s]).sum()
    }

    /// `n` singleton scenarios (`s^i` has its only one at box `i`), uniform.
    pub fn singletons(n: usize) -> Self {
        let p = Rational::new(BigInt::one(), BigInt::from(n));
        Self { n_boxes: n, scenarios: (0..n).map(|i| 1u64 << i).collect(), prior: vec![p; n] }
    }

    fn validate(&self) -> Result<(), MsscError> {
        if self.n_boxes == 0 || self.n_boxes > 64 {
            return Err(MsscError::Invalid(format!("number of boxes must be in 1..=64, got {}", self.n_boxes)));
        }
        if self.scenarios.is_empty() {
            return Err(MsscError::Invalid("instance has no scenarios".into()));
        }
        if self.prior.len() != self.scenarios.len() {
            return Err(MsscError::Invalid(format!(
                "{} scenarios but {} prior masses",
                self.scenarios.len(),
                self.prior.len()
            )));
        }
        let box_mask = if self.n_boxes == 64 { u64::MAX } else { (1u64 << self.n_boxes) - 1 };
        for (s, &bits) in self.scenarios.iter().enumerate() {
            if bits == 0 {
                return Err(MsscError::Invalid(format!("scenario {s} has no one-bit and cannot be covered")));
            }
            if bits & !box_mask != 0 {
                return Err(MsscError::Invalid(format!("scenario {s} refers to a box beyond {}", self.n_boxes)));
            }
        }
        for (s, p) in self.prior.iter().enumerate() {
            if !p.is_positive() {
                return Err(MsscError::Invalid(format!("prior mass of scenario {s} must be positive")));
            }
        }
        let total: Rational = self.prior.iter().sum();
        if !total.is_one() {
            return Err(MsscError::Invalid(format!("prior sums to {}, expected 1", format_rational(&total))));
        }
        Ok(())
    }
}

/// A problem plus the feedback tree. Node costs price the next signal; the
/// time-dependent algorithms ignore them and advance one level per query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsscInstance {
    pub problem: Problem,
    pub feedback: CostedFeedbackTree,
}

impl MsscInstance {
    /// Checks the problem and that every level of `feedback` partitions its
    /// parent, starting from all scenarios at the root.
    pub fn new(problem: Problem, feedback: CostedFeedbackTree) -> Result<Self, MsscError> {
        problem.validate()?;
        let n = problem.n_scenarios();
        for id in feedback.ids() {
            let node = feedback.node(id);
            let set = node
                .scenarios()
                .ok_or_else(|| MsscError::Invalid(format!("feedback node {id} carries a value, not scenarios")))?;
            let mut seen = vec![false; n];
            for &s in set {
                if s >= n {
                    return Err(MsscError::Invalid(format!("feedback node {id} lists unknown scenario {s}")));
                }
                if std::mem::replace(&mut seen[s], true) {
                    return Err(MsscError::Invalid(format!("feedback node {id} lists scenario {s} twice")));
                }
            }
            if id == feedback.root() && set.len() != n {
                return Err(MsscError::Invalid("feedback root must contain every scenario".into()));
            }
            if node.children.is_empty() {
                continue;
            }
            if node.cost == 0 {
                return Err(MsscError::Invalid(format!("feedback node {id} has zero signal cost")));
            }
            let mut covered = vec![false; n];
            for child in &node.children {
                for &s in feedback.node(child.id).scenarios().unwrap_or(&[]) {
                    if !seen[s] || std::mem::replace(&mut covered[s], true) {
                        return Err(MsscError::Invalid(format!(
                            "children of feedback node {id} do not partition it (scenario {s})"
                        )));
                    }
                }
            }
            if covered != seen {
                return Err(MsscError::Invalid(format!("children of feedback node {id} do not cover it")));
            }
        }
        Ok(Self { problem, feedback })
    }

    /// Builds the feedback tree from nested `(scenarios, cost, children)`;
    /// edge probabilities are the posterior masses.
    pub fn from_nested(problem: Problem, root: FeedbackSpec) -> Result<Self, MsscError> {
        let mut parts: Vec<(Payload, u64, Vec<Child>)> = Vec::new();
        fn add(
            problem: &Problem,
            spec: &FeedbackSpec,
            parts: &mut Vec<(Payload, u64, Vec<Child>)>,
        ) -> Result<usize, MsscError> {
            let id = parts.len();
            parts.push((Payload::Scenarios(spec.scenarios.clone()), spec.cost, Vec::new()));
            if spec.scenarios.iter().any(|&s| s >= problem.n_scenarios()) {
                return Err(MsscError::Invalid(format!("feedback lists a scenario beyond {}", problem.n_scenarios())));
            }
            let parent_mass = problem.mass(&spec.scenarios);
            let mut children = Vec::with_capacity(spec.children.len());
            for child in &spec.children {
                let child_id = add(problem, child, parts)?;
                let prob = if parent_mass.is_zero() {
                    Rational::zero()
                } else {
                    problem.mass(&child.scenarios) / &parent_mass
                };
                children.push(Child { id: NodeId(child_id), prob });
            }
            parts[id].2 = children;
            Ok(id)
        }
        add(&problem, &root, &mut parts)?;
        let feedback =
            CostedFeedbackTree::from_parts(parts, NodeId(0)).map_err(|e| MsscError::Invalid(e.to_string()))?;
        Self::new(problem, feedback)
    }

    /// No feedback at all: a single leaf holding every scenario.
    pub fn without_feedback(problem: Problem) -> Result<Self, MsscError> {
        let all = (0..problem.n_scenarios()).collect();
        Self::from_nested(problem, FeedbackSpec::leaf(all))
    }

    pub fn scenarios_at(&self, node: NodeId) -> &[usize] {
        self.feedback.node(node).scenarios().expect("validated scenario payload")
    }

    /// Child of `node` containing `scenario`, or `None` at a leaf.
    pub fn child_containing(&self, node: NodeId, scenario: usize) -> Option<NodeId> {
        self.feedback.node(node).children.iter().find(|c| self.scenarios_at(c.id).contains(&scenario)).map(|c| c.id)
    }

    /// Unit-cost instance: a signal of price `c` becomes `c` free signals,
    /// the first `c - 1` of which reveal nothing.
    pub fn normalized(&self) -> (MsscInstance, NormalizedTree) {
        let norm = normalize_costs(&self.feedback).expect("validated costs are positive");
        let inst = MsscInstance { problem: self.problem.clone(), feedback: norm.tree.clone() };
        (inst, norm)
    }

    pub fn is_unit_cost(&self) -> bool {
        self.feedback.ids().all(|id| self.feedback.node(id).is_leaf() || self.feedback.node(id).cost == 1)
    }

    pub fn to_spec(&self) -> FeedbackSpec {
        fn go(inst: &MsscInstance, id: NodeId) -> FeedbackSpec {
            let node = inst.feedback.node(id);
            FeedbackSpec {
                scenarios: inst.scenarios_at(id).to_vec(),
                cost: node.cost,
                children: node.children.iter().map(|c| go(inst, c.id)).collect(),
            }
        }
        go(self, self.feedback.root())
    }
}

/// Nested feedback tree as written in instance files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSpec {
    pub scenarios: Vec<usize>,
    #[serde(default = "unit_cost")]
    pub cost: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<FeedbackSpec>,
}

fn unit_cost() -> u64 {
    1
}

impl FeedbackSpec {
    pub fn leaf(scenarios: Vec<usize>) -> Self {
        Self { scenarios, cost: 1, children: Vec::new() }
    }

    pub fn node(scenarios: Vec<usize>, cost: u64, children: Vec<FeedbackSpec>) -> Self {
        Self { scenarios, cost, children }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawInstance {
    boxes: usize,
    scenarios: Vec<String>,
    prior: Vec<String>,
    feedback: FeedbackSpec,
}

/// Parses the JSON instance format:
/// `{"boxes": n, "scenarios": ["0110", ...], "prior": ["1/2", ...], "feedback": {...}}`.
/// Character `b` of a scenario bit string is `s_b`.
pub fn parse_instance(text: &str) -> Result<MsscInstance, MsscError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| MsscError::Format(e.to_string()))?;
    if raw.boxes == 0 || raw.boxes > 64 {
        return Err(MsscError::Format(format!("boxes must be in 1..=64, got {}", raw.boxes)));
    }
    let mut scenarios = Vec::with_capacity(raw.scenarios.len());
    for (s, bits) in raw.scenarios.iter().enumerate() {
        if bits.len() != raw.boxes {
            return Err(MsscError::Format(format!(
                "scenarios[{s}]: expected {} bits, found {}",
                raw.boxes,
                bits.len()
            )));
        }
        let mut mask = 0u64;
        for (b, ch) in bits.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => mask |= 1 << b,
                other => {
                    return Err(MsscError::Format(format!("scenarios[{s}]: invalid bit {other:?}")));
                }
            }
        }
        scenarios.push(mask);
    }
    let mut prior = Vec::with_capacity(raw.prior.len());
    for (s, text) in raw.prior.iter().enumerate() {
        prior.push(parse_rational(text).map_err(|e| MsscError::Format(format!("prior[{s}]: {e}")))?);
    }
    let problem = Problem { n_boxes: raw.boxes, scenarios, prior };
    MsscInstance::from_nested(problem, raw.feedback)
}

pub fn serialize_instance(inst: &MsscInstance) -> String {
    let p = &inst.problem;
    let raw = RawInstance {
        boxes: p.n_boxes,
        scenarios: p
            .scenarios
            .iter()
            .map(|&mask| (0..p.n_boxes).map(|b| if mask >> b & 1 == 1 { '1' } else { '0' }).collect())
            .collect(),
        prior: p.prior.iter().map(format_rational).collect(),
        feedback: inst.to_spec(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("instance serializes");
    text.push('\n');
    text
}

/// Parameters of the small random instances used for oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub n_boxes: usize,
    pub n_scenarios: usize,
    pub depth: usize,
    /// Signal prices are drawn from `1..=max_cost`.
    pub max_cost: u64,
    pub seed: u64,
}

/// Random scenarios (nonzero bit vectors), prior weights in `1..=4`, and a
/// feedback tree where each node splits its set into up to three random
/// parts until `depth`.
pub fn random_instance(spec: RandomInstanceSpec) -> Result<MsscInstance, MsscError> {
    if spec.n_boxes == 0 || spec.n_boxes > 64 || spec.n_scenarios == 0 || spec.max_cost == 0 {
        return Err(MsscError::Invalid(format!("bad random instance parameters {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let full = if spec.n_boxes == 64 { u64::MAX } else { (1u64 << spec.n_boxes) - 1 };
    let scenarios: Vec<u64> = (0..spec.n_scenarios)
        .map(|_| {
            // Sparse bit vectors keep the instances interesting.
            let mut mask = 0;
            while mask == 0 {
                mask = (0..spec.n_boxes).filter(|_| rng.gen_bool(0.35)).fold(0u64, |m, b| m | 1 << b) & full;
            }
            mask
        })
        .collect();
    let weights: Vec<u32> = (0..spec.n_scenarios).map(|_| rng.gen_range(1..=4)).collect();
    let total: u32 = weights.iter().sum();
    let prior = weights.iter().map(|&w| Rational::new(BigInt::from(w), BigInt::from(total))).collect();
    let problem = Problem { n_boxes: spec.n_boxes, scenarios, prior };

    fn grow(rng: &mut ChaCha8Rng, set: Vec<usize>, depth: usize, spec: &RandomInstanceSpec) -> FeedbackSpec {
        let cost = rng.gen_range(1..=spec.max_cost);
        if depth == spec.depth || rng.gen_bool(0.2) {
            return FeedbackSpec::node(set, cost, Vec::new());
        }
        let parts = rng.gen_range(1..=3usize);
        let mut buckets = vec![Vec::new(); parts];
        for s in set {
            buckets[rng.gen_range(0..parts)].push(s);
        }
        let children =
            buckets.into_iter().filter(|b| !b.is_empty()).map(|b| grow(rng, b, depth + 1, spec)).collect::<Vec<_>>();
        let set = children.iter().flat_map(|c| c.scenarios.iter().copied()).collect::<Vec<_>>();
        let mut set = set;
        set.sort_unstable();
        FeedbackSpec::node(set, cost, children)
    }
    let root = grow(&mut rng, (0..spec.n_scenarios).collect(), 0, &spec);
    MsscInstance::from_nested(problem, root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn three_singletons() -> Problem {
        Problem::singletons(3)
    }

    #[test]
    fn rejects_uncoverable_scenario() {
        let problem = Problem { n_boxes: 2, scenarios: vec![0b01, 0], prior: vec![ratio(1, 2), ratio(1, 2)] };
        assert!(MsscInstance::without_feedback(problem).is_err());
    }

    #[test]
    fn rejects_bad_partitions() {
        let bad =
            FeedbackSpec::node(vec![0, 1, 2], 1, vec![FeedbackSpec::leaf(vec![0]), FeedbackSpec::leaf(vec![0, 1])]);
        assert!(MsscInstance::from_nested(three_singletons(), bad).is_err());
        let missing = FeedbackSpec::node(vec![0, 1, 2], 1, vec![FeedbackSpec::leaf(vec![0, 1])]);
        assert!(MsscInstance::from_nested(three_singletons(), missing).is_err());
        let partial_root = FeedbackSpec::leaf(vec![0, 1]);
        assert!(MsscInstance::from_nested(three_singletons(), partial_root).is_err());
        let ok =
            FeedbackSpec::node(vec![0, 1, 2], 2, vec![FeedbackSpec::leaf(vec![2]), FeedbackSpec::leaf(vec![0, 1])]);
        let inst = MsscInstance::from_nested(three_singletons(), ok).unwrap();
        assert_eq!(inst.child_containing(inst.feedback.root(), 1), Some(NodeId(2)));
        assert_eq!(inst.feedback.node(inst.feedback.root()).children[1].prob, ratio(2, 3));
    }

    #[test]
    fn file_round_trip() {
        let spec =
            FeedbackSpec::node(vec![0, 1, 2], 3, vec![FeedbackSpec::leaf(vec![0]), FeedbackSpec::leaf(vec![1, 2])]);
        let inst = MsscInstance::from_nested(three_singletons(), spec).unwrap();
        let text = serialize_instance(&inst);
        assert!(text.contains("\"100\""));
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_instance("{"), Err(MsscError::Format(_))));
        let text = r#"{"boxes": 2, "scenarios": ["1"], "prior": ["1"], "feedback": {"scenarios": [0]}}"#;
        assert!(matches!(parse_instance(text), Err(MsscError::Format(_))));
        let text = r#"{"boxes": 2, "scenarios": ["1x"], "prior": ["1"], "feedback": {"scenarios": [0]}}"#;
        assert!(matches!(parse_instance(text), Err(MsscError::Format(_))));
        let text = r#"{"boxes": 2, "scenarios": ["10"], "prior": ["1/2"], "feedback": {"scenarios": [0]}}"#;
        assert!(matches!(parse_instance(text), Err(MsscError::Invalid(_))));
    }

    #[test]
    fn random_instances_are_valid_and_seeded() {
        for seed in 0..200 {
            let spec = RandomInstanceSpec { n_boxes: 5, n_scenarios: 8, depth: 3, max_cost: 3, seed };
            let a = random_instance(spec).unwrap();
            assert_eq!(a, random_instance(spec).unwrap());
            assert!(a.feedback.horizon() <= 3);
        }
    }

    #[test]
    fn normalization_adds_silent_levels() {
        let spec =
            FeedbackSpec::node(vec![0, 1, 2], 3, vec![FeedbackSpec::leaf(vec![0]), FeedbackSpec::leaf(vec![1, 2])]);
        let inst = MsscInstance::from_nested(three_singletons(), spec).unwrap();
        let (unit, norm) = inst.normalized();
        assert!(unit.is_unit_cost());
        assert_eq!(norm.virtual_count(), 2);
        assert_eq!(unit.feedback.horizon(), 3);
        MsscInstance::new(unit.problem.clone(), unit.feedback.clone()).unwrap();
    }
}
