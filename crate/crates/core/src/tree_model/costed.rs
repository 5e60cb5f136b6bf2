//! Feedback trees whose edges cost an integer number of units, and their
//! reduction to unit-cost trees by inserting virtual nodes.

use num_traits::One;

use super::{assign_depths, Child, InstanceTree, NodeId, TreeError};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Optimal posterior cost at this node (offline buying information).
    Value(Rational),
    /// Indices of the scenarios consistent with the signals so far.
    Scenarios(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostedNode {
    pub payload: Payload,
    /// Price of the next signal, i.e. of moving from this node to a child.
    pub cost: u64,
    pub children: Vec<Child>,
    pub depth: usize,
}

impl CostedNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn value(&self) -> Option<&Rational> {
        match &self.payload {
            Payload::Value(v) => Some(v),
            Payload::Scenarios(_) => None,
        }
    }

    pub fn scenarios(&self) -> Option<&[usize]> {
        match &self.payload {
            Payload::Scenarios(s) => Some(s),
            Payload::Value(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostedFeedbackTree {
    nodes: Vec<CostedNode>,
    root: NodeId,
}

impl CostedFeedbackTree {
    /// `parts[i] = (payload, cost, children)`.
    pub fn from_parts(parts: Vec<(Payload, u64, Vec<Child>)>, root: NodeId) -> Result<Self, TreeError> {
        let depths = assign_depths(parts.len(), root, |i| parts[i].2.iter().map(|c| c.id).collect())?;
        let nodes = parts
            .into_iter()
            .zip(depths)
            .map(|((payload, cost, children), depth)| CostedNode { payload, cost, children, depth })
            .collect();
        Ok(Self { nodes, root })
    }

    /// Attaches step costs to an instance tree; `cost(id)` prices the edges
    /// leaving `id`.
    pub fn from_instance_tree(tree: &InstanceTree, mut cost: impl FnMut(NodeId) -> u64) -> Self {
        let parts = tree
            .ids()
            .map(|id| {
                let node = tree.node(id);
                (Payload::Value(node.value.clone()), cost(id), node.children.clone())
            })
            .collect();
        Self::from_parts(parts, tree.root()).expect("instance trees are trees")
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &CostedNode {
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

    pub fn horizon(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Converts a value-payload tree into an [`InstanceTree`] (costs dropped).
    pub fn to_instance_tree(&self) -> Result<InstanceTree, TreeError> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            values.push(node.value().cloned().ok_or(TreeError::NotAValueTree(NodeId(i)))?);
        }
        InstanceTree::from_parts(values, self.nodes.iter().map(|n| n.children.clone()).collect(), self.root)
    }
}

/// Unit-cost tree produced by [`normalize_costs`] plus the correspondence
/// with the original tree.
#[derive(Debug, Clone)]
pub struct NormalizedTree {
    pub tree: CostedFeedbackTree,
    /// Normalized node -> original node, `None` for virtual nodes.
    origin: Vec<Option<NodeId>>,
    /// Normalized node -> (original node whose payload it repeats, units of
    /// that node's outgoing edge already paid).
    carrier: Vec<(NodeId, u64)>,
    /// Original node -> normalized node.
    image: Vec<NodeId>,
}

impl NormalizedTree {
    pub fn is_virtual(&self, id: NodeId) -> bool {
        self.origin[id.0].is_none()
    }

    pub fn original_of(&self, id: NodeId) -> Option<NodeId> {
        self.origin[id.0]
    }

    pub fn image_of(&self, original: NodeId) -> NodeId {
        self.image[original.0]
    }

    /// Maps a stop at normalized node `id` back to the original instance:
    /// the original node whose posterior is in force and how many units of
    /// its next signal were already paid.
    pub fn resolve(&self, id: NodeId) -> (NodeId, u64) {
        self.carrier[id.0]
    }

    pub fn virtual_count(&self) -> usize {
        self.origin.iter().filter(|o| o.is_none()).count()
    }
}

/// Replaces every edge of cost `c` by a chain of `c` unit edges.
///
/// The `c - 1` virtual nodes sit between a node and all of its children and
/// repeat the node's payload, so no information is revealed before the full
/// price has been paid.
pub fn normalize_costs(cf: &CostedFeedbackTree) -> Result<NormalizedTree, TreeError> {
    for id in cf.ids() {
        let node = cf.node(id);
        if !node.is_leaf() && node.cost == 0 {
            return Err(TreeError::InvalidCost { node: id, cost: 0 });
        }
    }

    let mut parts: Vec<(Payload, u64, Vec<Child>)> = Vec::with_capacity(cf.len());
    let mut origin = Vec::with_capacity(cf.len());
    let mut carrier = Vec::with_capacity(cf.len());
    let mut image = vec![NodeId(usize::MAX); cf.len()];

    // Allocate original nodes first so ids of the input survive as a prefix.
    for id in cf.ids() {
        let node = cf.node(id);
        parts.push((node.payload.clone(), 1, Vec::new()));
        origin.push(Some(id));
        carrier.push((id, 0));
        image[id.0] = NodeId(id.0);
    }

    for id in cf.ids() {
        let node = cf.node(id);
        if node.is_leaf() {
            continue;
        }
        let mut tail = id.0;
        for paid in 1..node.cost {
            let virt = parts.len();
            parts.push((node.payload.clone(), 1, Vec::new()));
            origin.push(None);
            carrier.push((id, paid));
            parts[tail].2.push(Child { id: NodeId(virt), prob: Rational::one() });
            tail = virt;
        }
        parts[tail].2 = node.children.clone();
    }

    let tree = CostedFeedbackTree::from_parts(parts, cf.root())?;
    Ok(NormalizedTree { tree, origin, carrier, image })
}
