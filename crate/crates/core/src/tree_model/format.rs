//! JSON instance files.
//!
//! ```json
//! {"kind": "supermartingale",
//!  "nodes": [{"id": 0, "value": "1/1", "children": [{"id": 1, "prob": "1/2"}, ...]}, ...],
//!  "root": 0}
//! ```
//!
//! Feedback trees use `"kind": "feedback"` and may carry `cost` and
//! `scenarios` on each node. Rationals are `"p/q"` strings so values
//! round-trip exactly. Parsing only checks syntax and tree shape; the
//! super-martingale property is left to the validator.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Child, CostedFeedbackTree, InstanceTree, NodeId, Payload, TreeError};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("invalid tree: {0}")]
    Structure(#[from] TreeError),
    #[error("expected a {expected} tree, found {found}")]
    WrongKind { expected: &'static str, found: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Supermartingale,
    Feedback,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTree {
    kind: Kind,
    nodes: Vec<RawNode>,
    root: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawNode {
    id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenarios: Option<Vec<usize>>,
    #[serde(default)]
    children: Vec<RawChild>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawChild {
    id: i64,
    prob: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeDocument {
    Supermartingale(InstanceTree),
    Feedback(CostedFeedbackTree),
}

fn raw_children(children: &[Child]) -> Vec<RawChild> {
    children.iter().map(|c| RawChild { id: c.id.0 as i64, prob: format_rational(&c.prob) }).collect()
}

fn to_text(raw: &RawTree) -> String {
    let mut text = serde_json::to_string_pretty(raw).expect("tree serializes");
    text.push('\n');
    text
}

pub fn serialize(tree: &InstanceTree) -> String {
    let nodes = tree
        .ids()
        .map(|id| {
            let node = tree.node(id);
            RawNode {
                id: id.0 as i64,
                value: Some(format_rational(&node.value)),
                cost: None,
                scenarios: None,
                children: raw_children(&node.children),
            }
        })
        .collect();
    to_text(&RawTree { kind: Kind::Supermartingale, nodes, root: tree.root().0 as i64 })
}

pub fn serialize_costed(tree: &CostedFeedbackTree) -> String {
    let nodes = tree
        .ids()
        .map(|id| {
            let node = tree.node(id);
            let (value, scenarios) = match &node.payload {
                Payload::Value(v) => (Some(format_rational(v)), None),
                Payload::Scenarios(s) => (None, Some(s.clone())),
            };
            RawNode { id: id.0 as i64, value, cost: Some(node.cost), scenarios, children: raw_children(&node.children) }
        })
        .collect();
    to_text(&RawTree { kind: Kind::Feedback, nodes, root: tree.root().0 as i64 })
}

fn field_error(path: String, message: impl Into<String>) -> FormatError {
    FormatError::Field { path, message: message.into() }
}

fn parse_field(text: &str, path: impl FnOnce() -> String) -> Result<Rational, FormatError> {
    parse_rational(text).map_err(|e| field_error(path(), e.to_string()))
}

pub fn deserialize(text: &str) -> Result<TreeDocument, FormatError> {
    let raw: RawTree = serde_json::from_str(text)?;

    let mut index: HashMap<i64, usize> = HashMap::with_capacity(raw.nodes.len());
    for (i, node) in raw.nodes.iter().enumerate() {
        if index.insert(node.id, i).is_some() {
            return Err(field_error(format!("nodes[{i}].id"), format!("duplicate node id {}", node.id)));
        }
    }
    let root =
        *index.get(&raw.root).ok_or_else(|| field_error("root".into(), format!("unknown node id {}", raw.root)))?;

    let mut children = Vec::with_capacity(raw.nodes.len());
    for (i, node) in raw.nodes.iter().enumerate() {
        let mut list = Vec::with_capacity(node.children.len());
        for (j, child) in node.children.iter().enumerate() {
            let path = || format!("nodes[{i}].children[{j}]");
            let id = *index
                .get(&child.id)
                .ok_or_else(|| field_error(path() + ".id", format!("unknown node id {}", child.id)))?;
            let prob = parse_field(&child.prob, || path() + ".prob")?;
            list.push(Child { id: NodeId(id), prob });
        }
        children.push(list);
    }

    match raw.kind {
        Kind::Supermartingale => {
            let mut values = Vec::with_capacity(raw.nodes.len());
            for (i, node) in raw.nodes.iter().enumerate() {
                let text =
                    node.value.as_deref().ok_or_else(|| field_error(format!("nodes[{i}].value"), "missing value"))?;
                values.push(parse_field(text, || format!("nodes[{i}].value"))?);
            }
            Ok(TreeDocument::Supermartingale(InstanceTree::from_parts(values, children, NodeId(root))?))
        }
        Kind::Feedback => {
            let mut parts = Vec::with_capacity(raw.nodes.len());
            for ((i, node), kids) in raw.nodes.iter().enumerate().zip(children) {
                let payload = match (&node.value, &node.scenarios) {
                    (_, Some(s)) => Payload::Scenarios(s.clone()),
                    (Some(v), None) => Payload::Value(parse_field(v, || format!("nodes[{i}].value"))?),
                    (None, None) => {
                        return Err(field_error(
                            format!("nodes[{i}]"),
                            "feedback node needs a value or a scenario list",
                        ))
                    }
                };
                parts.push((payload, node.cost.unwrap_or(1), kids));
            }
            Ok(TreeDocument::Feedback(CostedFeedbackTree::from_parts(parts, NodeId(root))?))
        }
    }
}

pub fn deserialize_instance(text: &str) -> Result<InstanceTree, FormatError> {
    match deserialize(text)? {
        TreeDocument::Supermartingale(tree) => Ok(tree),
        TreeDocument::Feedback(_) => Err(FormatError::WrongKind { expected: "supermartingale", found: "feedback" }),
    }
}
