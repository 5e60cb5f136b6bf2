//! Instance trees: the finite-support representation of a super-martingale
//! sequence `(X_0, ..., X_n)`.
//!
//! A node at depth `i` stores one realization of `X_i`; each edge carries the
//! conditional probability of moving to that child. Costed feedback trees,
//! signaling-scheme expansion and the JSON file format live in submodules.

mod costed;
mod format;
mod signaling;

pub use costed::{normalize_costs, CostedFeedbackTree, CostedNode, NormalizedTree, Payload};
pub use format::{deserialize, deserialize_instance, serialize, serialize_costed, FormatError, TreeDocument};
pub use signaling::{determinize_signaling, DeterministicSignaling, ScenarioCopy, SignalingError};

use std::collections::VecDeque;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Child {
    pub id: NodeId,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub value: Rational,
    pub children: Vec<Child>,
    pub depth: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("root {0} does not exist")]
    MissingRoot(NodeId),
    #[error("node {parent} references missing child {child}")]
    MissingChild { parent: NodeId, child: NodeId },
    #[error("node {0} has more than one parent or lies on a cycle")]
    NotATree(NodeId),
    #[error("node {0} is unreachable from the root")]
    Unreachable(NodeId),
    #[error("node {node} has negative value {value}")]
    NegativeValue { node: NodeId, value: Rational },
    #[error("node {node} has cost {cost}; step costs must be positive integers")]
    InvalidCost { node: NodeId, cost: u64 },
    #[error("node {0} carries a scenario payload where a value is required")]
    NotAValueTree(NodeId),
    #[error("perturbation factor {0} is below 1")]
    AlphaBelowOne(Rational),
}

/// Breadth-first depth assignment that also checks the parent structure.
pub(crate) fn assign_depths(
    len: usize,
    root: NodeId,
    children_of: impl Fn(usize) -> Vec<NodeId>,
) -> Result<Vec<usize>, TreeError> {
    if len == 0 {
        return Err(TreeError::Empty);
    }
    if root.0 >= len {
        return Err(TreeError::MissingRoot(root));
    }
    let mut depth = vec![usize::MAX; len];
    depth[root.0] = 0;
    let mut queue = VecDeque::from([root.0]);
    while let Some(at) = queue.pop_front() {
        for child in children_of(at) {
            if child.0 >= len {
                return Err(TreeError::MissingChild { parent: NodeId(at), child });
            }
            if depth[child.0] != usize::MAX {
                return Err(TreeError::NotATree(child));
            }
            depth[child.0] = depth[at] + 1;
            queue.push_back(child.0);
        }
    }
    if let Some(orphan) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(TreeError::Unreachable(NodeId(orphan)));
    }
    Ok(depth)
}

/// Incremental construction of an [`InstanceTree`].
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    values: Vec<Rational>,
    children: Vec<Vec<Child>>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: Rational) -> NodeId {
        self.values.push(value);
        self.children.push(Vec::new());
        NodeId(self.values.len() - 1)
    }

    pub fn attach(&mut self, parent: NodeId, child: NodeId, prob: Rational) {
        self.children[parent.0].push(Child { id: child, prob });
    }

    /// Adds a child node under `parent` and returns its id.
    pub fn add_child(&mut self, parent: NodeId, value: Rational, prob: Rational) -> NodeId {
        let child = self.add(value);
        self.attach(parent, child, prob);
        child
    }

    pub fn build(self, root: NodeId) -> Result<InstanceTree, TreeError> {
        InstanceTree::from_parts(self.values, self.children, root)
    }
}

/// Rooted tree of nonnegative rational values with child-transition
/// probabilities.
///
/// Construction only enforces the tree shape and nonnegativity; probability
/// sums, ragged depths and the super-martingale property are reported by
/// [`validate_supermartingale`] so hand-written files can be inspected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceTree {
    nodes: Vec<Node>,
    root: NodeId,
}

impl InstanceTree {
    pub fn from_parts(values: Vec<Rational>, children: Vec<Vec<Child>>, root: NodeId) -> Result<Self, TreeError> {
        assert_eq!(values.len(), children.len());
        let depths = assign_depths(values.len(), root, |i| children[i].iter().map(|c| c.id).collect())?;
        let mut nodes = Vec::with_capacity(values.len());
        for (i, ((value, children), depth)) in values.into_iter().zip(children).zip(depths).enumerate() {
            if value.is_negative() {
                return Err(TreeError::NegativeValue { node: NodeId(i), value });
            }
            nodes.push(Node { value, children, depth });
        }
        Ok(Self { nodes, root })
    }

    pub fn leaf(value: Rational) -> Self {
        let mut b = TreeBuilder::new();
        let root = b.add(value);
        b.build(root).expect("single node is a tree")
    }

    /// Deterministic sequence `values[0], values[1], ...` as a single path.
    pub fn chain(values: &[Rational]) -> Self {
        assert!(!values.is_empty(), "a chain needs at least one value");
        let mut b = TreeBuilder::new();
        let root = b.add(values[0].clone());
        let mut at = root;
        for v in &values[1..] {
            at = b.add_child(at, v.clone(), Rational::one());
        }
        b.build(root).expect("chain is a tree")
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Largest depth of any node; the sequence length `n`.
    pub fn horizon(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Probability of reaching each node from the root (indexed by node id).
    pub fn reach_probabilities(&self) -> Vec<Rational> {
        let mut reach = vec![Rational::zero(); self.nodes.len()];
        reach[self.root.0] = Rational::one();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            for child in &self.nodes[id.0].children {
                reach[child.id.0] = &reach[id.0] * &child.prob;
                stack.push(child.id);
            }
        }
        reach
    }

    /// Node ids in depth-first preorder (parents before children).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            for child in self.nodes[id.0].children.iter().rev() {
                stack.push(child.id);
            }
        }
        order
    }

    /// Same shape, new values. `f` receives the node, its id and the already
    /// mapped value of its parent.
    pub fn map_values(
        &self,
        mut f: impl FnMut(NodeId, &Node, Option<&Rational>) -> Rational,
    ) -> Result<InstanceTree, TreeError> {
        let mut values: Vec<Option<Rational>> = vec![None; self.nodes.len()];
        let mut parent = vec![None; self.nodes.len()];
        for id in self.preorder() {
            let p = parent[id.0].and_then(|p: NodeId| values[p.0].clone());
            values[id.0] = Some(f(id, &self.nodes[id.0], p.as_ref()));
            for child in &self.nodes[id.0].children {
                parent[child.id.0] = Some(id);
            }
        }
        InstanceTree::from_parts(
            values.into_iter().map(|v| v.expect("every node visited")).collect(),
            self.nodes.iter().map(|n| n.children.clone()).collect(),
            self.root,
        )
    }
}

/// The observed realization `(v_0, ..., v_i)` together with its nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPrefix {
    pub values: Vec<Rational>,
    pub node_ids: Vec<NodeId>,
}

impl PathPrefix {
    /// Builds the prefix from a root-descending chain of node ids.
    pub fn from_nodes(tree: &InstanceTree, node_ids: Vec<NodeId>) -> Option<Self> {
        let first = node_ids.first()?;
        if *first != tree.root() {
            return None;
        }
        for pair in node_ids.windows(2) {
            if !tree.node(pair[0]).children.iter().any(|c| c.id == pair[1]) {
                return None;
            }
        }
        let values = node_ids.iter().map(|&id| tree.node(id).value.clone()).collect();
        Some(Self { values, node_ids })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    ProbabilitySum { sum: String },
    ProbabilityOutOfRange { child: NodeId, prob: String },
    RaggedDepth { leaf_depth: usize, horizon: usize },
    MeanExceedsValue { mean: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::ProbabilitySum { sum } => {
                write!(f, "{}: child probabilities sum to {sum}", self.node)
            }
            ViolationKind::ProbabilityOutOfRange { child, prob } => {
                write!(f, "{}: edge to {child} has probability {prob} outside (0,1]", self.node)
            }
            ViolationKind::RaggedDepth { leaf_depth, horizon } => {
                write!(f, "{}: leaf at depth {leaf_depth}, horizon is {horizon}", self.node)
            }
            ViolationKind::MeanExceedsValue { mean, value } => {
                write!(f, "{}: conditional mean {mean} exceeds value {value}", self.node)
            }
        }
    }
}

/// Reports every structural defect and every node whose children's mean
/// exceeds its value by more than `tolerance`.
pub fn validate_supermartingale(tree: &InstanceTree, tolerance: &Rational) -> Vec<Violation> {
    let horizon = tree.horizon();
    let mut violations = Vec::new();
    for id in tree.ids() {
        let node = tree.node(id);
        if node.is_leaf() {
            if node.depth != horizon {
                violations
                    .push(Violation { node: id, kind: ViolationKind::RaggedDepth { leaf_depth: node.depth, horizon } });
            }
            continue;
        }
        let mut sum = Rational::zero();
        let mut mean = Rational::zero();
        for child in &node.children {
            if !child.prob.is_positive() || child.prob > Rational::one() {
                violations.push(Violation {
                    node: id,
                    kind: ViolationKind::ProbabilityOutOfRange { child: child.id, prob: child.prob.to_string() },
                });
            }
            sum += &child.prob;
            mean += &child.prob * &tree.node(child.id).value;
        }
        if !sum.is_one() {
            violations.push(Violation { node: id, kind: ViolationKind::ProbabilitySum { sum: sum.to_string() } });
        }
        if mean > &node.value + tolerance {
            violations.push(Violation {
                node: id,
                kind: ViolationKind::MeanExceedsValue { mean: mean.to_string(), value: node.value.to_string() },
            });
        }
    }
    violations
}

/// Samples root-to-leaf paths. Child selection uses precomputed `f64`
/// cumulative probabilities, which is plenty for Monte-Carlo work.
#[derive(Debug, Clone)]
pub struct PathSampler<'a> {
    tree: &'a InstanceTree,
    cumulative: Vec<Vec<f64>>,
}

impl<'a> PathSampler<'a> {
    pub fn new(tree: &'a InstanceTree) -> Self {
        let cumulative = tree
            .nodes
            .iter()
            .map(|node| {
                let mut acc = 0.0;
                node.children
                    .iter()
                    .map(|c| {
                        acc += to_f64(&c.prob);
                        acc
                    })
                    .collect()
            })
            .collect();
        Self { tree, cumulative }
    }

    pub fn sample_ids<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<NodeId> {
        let mut at = self.tree.root();
        let mut ids = vec![at];
        loop {
            let node = self.tree.node(at);
            if node.is_leaf() {
                return ids;
            }
            let cumulative = &self.cumulative[at.0];
            let total = *cumulative.last().expect("internal node has children");
            let u: f64 = rng.gen::<f64>() * total;
            let pick = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
            at = node.children[pick].id;
            ids.push(at);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PathPrefix {
        let node_ids = self.sample_ids(rng);
        let values = node_ids.iter().map(|&id| self.tree.node(id).value.clone()).collect();
        PathPrefix { values, node_ids }
    }
}

/// Draws one full root-to-leaf path; deterministic given `seed`.
pub fn sample_path(tree: &InstanceTree, seed: u64) -> PathPrefix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PathSampler::new(tree).sample(&mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbRule {
    /// `ṽ = αv`.
    Max,
    /// `ṽ` uniform on `[v, αv]` (on a grid of `2^-20` steps).
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbTarget {
    #[default]
    AllNodes,
    LeavesOnly,
}

const PERTURB_GRID_BITS: u32 = 20;

/// Replaces node values by `ṽ ∈ [v, αv]`.
///
/// The output is generally not a super-martingale; it models a learner that
/// only has an `α`-approximate solver for each posterior problem.
pub fn perturb_leaves(
    tree: &InstanceTree,
    alpha: &Rational,
    rule: PerturbRule,
    target: PerturbTarget,
) -> Result<InstanceTree, TreeError> {
    if *alpha < Rational::one() {
        return Err(TreeError::AlphaBelowOne(alpha.clone()));
    }
    let mut rng = match rule {
        PerturbRule::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        PerturbRule::Max => None,
    };
    let grid = BigInt::one() << PERTURB_GRID_BITS;
    let slack = alpha - Rational::one();
    tree.map_values(|_, node, _| {
        if target == PerturbTarget::LeavesOnly && !node.is_leaf() {
            return node.value.clone();
        }
        match rng.as_mut() {
            None => alpha * &node.value,
            Some(rng) => {
                let step: u64 = rng.gen_range(0..=(1u64 << PERTURB_GRID_BITS));
                let u = Rational::new(BigInt::from(step), grid.clone());
                &node.value + &slack * &node.value * u
            }
        }
    })
}

/// Replaces every value by the running minimum along its root path, which
/// makes every realization nonincreasing and keeps the super-martingale
/// property (`E[min(X, a)] <= min(E[X], a)`).
pub fn running_min(tree: &InstanceTree) -> InstanceTree {
    tree.map_values(|_, node, parent| match parent {
        Some(p) if p < &node.value => p.clone(),
        _ => node.value.clone(),
    })
    .expect("same shape, nonnegative values")
}
