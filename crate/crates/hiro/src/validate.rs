//! Structural invariant checking for [`HierarchyIndex`].
//!
//! Violations are data, not errors: the checker always runs to completion
//! and reports everything it finds, naming the rule and the offending node.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::types::{HierarchyIndex, NodeId};

/// One broken invariant, naming the rule and the node it was detected at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub node: Option<NodeId>,
    pub detail: String,
}

impl Violation {
    pub fn new(rule: &'static str, node: Option<NodeId>, detail: impl Into<String>) -> Self {
        Violation {
            rule,
            node,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(id) => write!(f, "{} at {}: {}", self.rule, id, self.detail),
            None => write!(f, "{}: {}", self.rule, self.detail),
        }
    }
}

/// Check every structural invariant; an empty result means the index is valid.
///
/// Rules checked, per node and globally:
/// - layer 0 iff no parent; a named parent must exist, list the node among
///   its children, and sit exactly one layer above;
/// - every listed child must exist, name this node as its parent, and
///   appear only once ("parent-link-mismatch" is reported at the child);
/// - parent chains must be acyclic ("cycle-detected");
/// - the root layer is non-empty and the layer lists partition the node set;
/// - all embeddings share the index dimension, are finite, and have
///   strictly positive norm; token counts are positive.
pub fn validate_index(index: &HierarchyIndex) -> Vec<Violation> {
    let mut out = Vec::new();
    let nodes = index.nodes();

    if index.roots().is_empty() {
        out.push(Violation::new(
            "empty-root-layer",
            None,
            "layers[0] must be non-empty",
        ));
    }

    for (id, node) in nodes {
        if node.layer == 0 && node.parent.is_some() {
            out.push(Violation::new(
                "root-parent",
                Some(id.clone()),
                "layer-0 node must not have a parent",
            ));
        }
        if node.layer > 0 && node.parent.is_none() {
            out.push(Violation::new(
                "root-parent",
                Some(id.clone()),
                format!("node at layer {} has no parent", node.layer),
            ));
        }

        if let Some(parent_id) = &node.parent {
            match nodes.get(parent_id) {
                None => out.push(Violation::new(
                    "missing-parent",
                    Some(id.clone()),
                    format!("parent {parent_id} does not exist"),
                )),
                Some(parent) => {
                    if !parent.children.contains(id) {
                        out.push(Violation::new(
                            "parent-link-mismatch",
                            Some(id.clone()),
                            format!("parent {parent_id} does not list this node as a child"),
                        ));
                    }
                    if parent.layer + 1 != node.layer {
                        out.push(Violation::new(
                            "layer-arithmetic",
                            Some(id.clone()),
                            format!(
                                "layer {} but parent {} is at layer {}",
                                node.layer, parent_id, parent.layer
                            ),
                        ));
                    }
                }
            }
        }

        let mut seen_children = HashSet::new();
        for child_id in &node.children {
            if !seen_children.insert(child_id) {
                out.push(Violation::new(
                    "duplicate-child",
                    Some(id.clone()),
                    format!("child {child_id} listed more than once"),
                ));
                continue;
            }
            match nodes.get(child_id) {
                None => out.push(Violation::new(
                    "missing-child",
                    Some(id.clone()),
                    format!("child {child_id} does not exist"),
                )),
                Some(child) => {
                    if child.parent.as_ref() != Some(id) {
                        out.push(Violation::new(
                            "parent-link-mismatch",
                            Some(child_id.clone()),
                            format!("listed as child of {id} but names a different parent"),
                        ));
                    }
                }
            }
        }

        if node.embedding.dim() != index.dim() {
            out.push(Violation::new(
                "embedding-dim",
                Some(id.clone()),
                format!(
                    "embedding dimension {} != index dimension {}",
                    node.embedding.dim(),
                    index.dim()
                ),
            ));
        }
        if node.embedding.values().iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(
                "embedding-non-finite",
                Some(id.clone()),
                "embedding has NaN or infinite components",
            ));
        } else if node.embedding.l2_norm() == 0.0 {
            out.push(Violation::new(
                "embedding-norm",
                Some(id.clone()),
                "attached embedding must have positive L2 norm",
            ));
        }
        if node.token_count == 0 {
            out.push(Violation::new(
                "token-count",
                Some(id.clone()),
                "token count must be positive",
            ));
        }
    }

    // Cycle detection along parent chains. Layer arithmetic already forbids
    // cycles on well-formed layers, but corrupt data can break both at once.
    let mut cleared: HashSet<&NodeId> = HashSet::new();
    for id in nodes.keys() {
        if cleared.contains(id) {
            continue;
        }
        let mut chain = Vec::new();
        let mut on_chain: HashSet<&NodeId> = HashSet::new();
        let mut current = id;
        loop {
            if cleared.contains(current) {
                break;
            }
            if !on_chain.insert(current) {
                out.push(Violation::new(
                    "cycle-detected",
                    Some(current.clone()),
                    "parent chain revisits this node",
                ));
                break;
            }
            chain.push(current);
            match nodes.get(current).and_then(|n| n.parent.as_ref()) {
                Some(parent_id) if nodes.contains_key(parent_id) => current = parent_id,
                _ => break,
            }
        }
        cleared.extend(chain);
    }

    // Layer lists must partition the node set and agree with node.layer.
    let mut filed: BTreeSet<&NodeId> = BTreeSet::new();
    for (layer_idx, layer) in index.layers().iter().enumerate() {
        for id in layer {
            match nodes.get(id) {
                None => out.push(Violation::new(
                    "layer-unknown-id",
                    Some(id.clone()),
                    format!("layers[{layer_idx}] lists an id with no node"),
                )),
                Some(node) if node.layer != layer_idx => out.push(Violation::new(
                    "layer-misfiled",
                    Some(id.clone()),
                    format!("filed in layers[{layer_idx}] but node.layer = {}", node.layer),
                )),
                Some(_) => {}
            }
            if !filed.insert(id) {
                out.push(Violation::new(
                    "layer-duplicate",
                    Some(id.clone()),
                    "appears more than once across layer lists",
                ));
            }
        }
    }
    for id in nodes.keys() {
        if !filed.contains(id) {
            out.push(Violation::new(
                "layer-misfiled",
                Some(id.clone()),
                "node missing from every layer list",
            ));
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Embedding, Node, SimilarityMetric};

    fn node(id: &str, layer: usize, parent: Option<&str>, children: &[&str]) -> Node {
        Node {
            id: NodeId::new(id).unwrap(),
            layer,
            parent: parent.map(|p| NodeId::new(p).unwrap()),
            children: children.iter().map(|c| NodeId::new(*c).unwrap()).collect(),
            text: format!("text of {id}"),
            embedding: Embedding::new(vec![1.0, 0.0]).unwrap(),
            token_count: 3,
        }
    }

    fn index(nodes: Vec<Node>) -> HierarchyIndex {
        HierarchyIndex::from_parts(2, "deterministic", "whitespace", SimilarityMetric::Cosine, nodes)
    }

    #[test]
    fn single_root_leaf_is_valid() {
        let idx = index(vec![node("r", 0, None, &[])]);
        assert!(validate_index(&idx).is_empty());
    }

    #[test]
    fn parent_link_mismatch_reported_at_child() {
        // a lists b as a child, but b claims no parent (and sits at layer 0).
        let idx = index(vec![node("a", 0, None, &["b"]), node("b", 0, None, &[])]);
        let violations = validate_index(&idx);
        assert!(violations
            .iter()
            .any(|v| v.rule == "parent-link-mismatch"
                && v.node == Some(NodeId::new("b").unwrap())));
    }

    #[test]
    fn cycle_is_detected() {
        let mut a = node("a", 1, Some("b"), &["b"]);
        let mut b = node("b", 1, Some("a"), &["a"]);
        a.layer = 1;
        b.layer = 1;
        let idx = index(vec![a, b]);
        let violations = validate_index(&idx);
        assert!(violations.iter().any(|v| v.rule == "cycle-detected"));
    }

    #[test]
    fn missing_parent_and_layer_arithmetic() {
        let idx = index(vec![
            node("r", 0, None, &["kid"]),
            // claims layer 2 under a layer-0 parent
            node("kid", 2, Some("r"), &[]),
        ]);
        let violations = validate_index(&idx);
        assert!(violations.iter().any(|v| v.rule == "layer-arithmetic"));

        let idx = index(vec![node("x", 1, Some("ghost"), &[])]);
        let violations = validate_index(&idx);
        assert!(violations.iter().any(|v| v.rule == "missing-parent"));
    }

    #[test]
    fn zero_norm_embedding_rejected() {
        let mut n = node("r", 0, None, &[]);
        n.embedding = Embedding::new(vec![0.0, 0.0]).unwrap();
        let violations = validate_index(&index(vec![n]));
        assert!(violations.iter().any(|v| v.rule == "embedding-norm"));
    }
}
