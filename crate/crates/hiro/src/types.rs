//! Domain types: embeddings, nodes, the layered hierarchy, and query parameters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-dimension real vector over a text span. Unit of all similarity math.
///
/// Construction checks dimension and finiteness. A zero vector is permitted
/// transiently (e.g. while accumulating), but anything attached to a
/// [`Node`] or [`crate::retrieval::Query`] must have strictly positive L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateVector(format!(
                "non-finite component {bad}"
            )));
        }
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit L2 norm. Errors on the zero vector.
    pub fn normalized(&self) -> Result<Embedding> {
        let norm = self.l2_norm();
        if norm == 0.0 {
            return Err(Error::DegenerateVector(
                "cannot normalize zero vector".into(),
            ));
        }
        Embedding::new(self.values.iter().map(|v| v / norm).collect())
    }
}

/// Opaque node identifier, unique within one index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Parse("empty node id".into()));
        }
        Ok(NodeId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One tree vertex: content text, its embedding, layer index, and links.
///
/// Fields are public data; structural consistency across nodes is owned by
/// [`crate::validate::validate_index`], not by this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// 0 = root layer; children sit exactly one layer below their parent.
    pub layer: usize,
    pub parent: Option<NodeId>,
    /// Ordered child list; empty iff this node is a leaf.
    pub children: Vec<NodeId>,
    pub text: String,
    pub embedding: Embedding,
    /// Tokenizer output length of `text` under the index's tokenizer.
    pub token_count: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Similarity metric. Higher value always means "more similar": distance
/// metrics are negated so every consumer can rank by one convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMetric {
    Cosine,
    NegEuclidean,
    NegManhattan,
}

impl SimilarityMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimilarityMetric::Cosine => "cosine",
            SimilarityMetric::NegEuclidean => "neg_euclidean",
            SimilarityMetric::NegManhattan => "neg_manhattan",
        }
    }
}

impl std::str::FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(SimilarityMetric::Cosine),
            "neg_euclidean" => Ok(SimilarityMetric::NegEuclidean),
            "neg_manhattan" => Ok(SimilarityMetric::NegManhattan),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which HIRO formulation to run.
///
/// The recursive variant earmarks root-layer nodes above the selection
/// threshold and then walks children; the iterative variant processes a
/// worklist where root-layer nodes get parent score 0, so a root whose
/// similarity exceeds the delta threshold is emitted directly. The two are
/// observably different on roots and both are first-class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiroVariant {
    #[default]
    Recursive,
    Iterative,
}

/// The two HIRO hyperparameters plus behavioral switches.
///
/// Degenerate threshold values are valid inputs with forced outputs (e.g. a
/// selection threshold above 1 empties the cosine earmark set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiroParams {
    /// Minimum similarity for a root-layer node to be earmarked (recursive
    /// variant) or for a leaf to be emitted. `S`.
    pub selection_threshold: f64,
    /// Minimum similarity gain of a child over its parent required to emit
    /// the child. `Δ`.
    pub delta_threshold: f64,
    /// When true, a parent whose entire subtree prunes to nothing is itself
    /// emitted. Leaves are never self-emitted by this rule. Default false.
    pub retain_parent_on_prune: bool,
    pub variant: HiroVariant,
}

impl HiroParams {
    pub fn new(selection_threshold: f64, delta_threshold: f64) -> Self {
        HiroParams {
            selection_threshold,
            delta_threshold,
            retain_parent_on_prune: false,
            variant: HiroVariant::Recursive,
        }
    }

    pub fn with_variant(mut self, variant: HiroVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_retain_parent(mut self, retain: bool) -> Self {
        self.retain_parent_on_prune = retain;
        self
    }
}

/// Immutable layered tree of [`Node`]s; the queryable artifact.
///
/// `layers[0]` holds the roots (a forest is permitted), each deeper layer
/// the next generation down. Within a layer, ids are kept in ascending
/// order, which is the canonical order for everything downstream: root
/// earmarking order, tie-breaking, and file round-trips.
///
/// [`HierarchyIndex::new`] validates; [`HierarchyIndex::from_parts`] does
/// not and exists for loaders, builders, and tests that need to inspect
/// broken trees via [`crate::validate::validate_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyIndex {
    nodes: BTreeMap<NodeId, Node>,
    layers: Vec<Vec<NodeId>>,
    dim: usize,
    embedder_id: String,
    tokenizer_id: String,
    metric: SimilarityMetric,
}

impl HierarchyIndex {
    /// Assemble and validate. Errors with the full violation list if any
    /// invariant fails.
    pub fn new(
        dim: usize,
        embedder_id: impl Into<String>,
        tokenizer_id: impl Into<String>,
        metric: SimilarityMetric,
        nodes: Vec<Node>,
    ) -> Result<Self> {
        let index = Self::from_parts(dim, embedder_id, tokenizer_id, metric, nodes);
        let violations = crate::validate::validate_index(&index);
        if violations.is_empty() {
            Ok(index)
        } else {
            Err(Error::InvalidIndex(violations))
        }
    }

    /// Assemble without validating. Layers are derived from the nodes'
    /// `layer` fields and sorted by id. Callers are responsible for running
    /// [`crate::validate::validate_index`] before querying.
    pub fn from_parts(
        dim: usize,
        embedder_id: impl Into<String>,
        tokenizer_id: impl Into<String>,
        metric: SimilarityMetric,
        nodes: Vec<Node>,
    ) -> Self {
        let n_layers = nodes.iter().map(|n| n.layer + 1).max().unwrap_or(0);
        let mut layers: Vec<Vec<NodeId>> = vec![Vec::new(); n_layers];
        let mut map = BTreeMap::new();
        for node in nodes {
            if node.layer < n_layers {
                layers[node.layer].push(node.id.clone());
            }
            map.insert(node.id.clone(), node);
        }
        for layer in &mut layers {
            layer.sort();
            layer.dedup();
        }
        HierarchyIndex {
            nodes: map,
            layers,
            dim,
            embedder_id: embedder_id.into(),
            tokenizer_id: tokenizer_id.into(),
            metric,
        }
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    /// Node lookup that maps absence to [`Error::InvalidIndex`]-adjacent
    /// failure for query paths.
    pub fn require_node(&self, id: &NodeId) -> Result<&Node> {
        self.nodes.get(id).ok_or_else(|| {
            Error::InvalidIndex(vec![crate::validate::Violation::new(
                "unknown-node",
                Some(id.clone()),
                "referenced node does not exist",
            )])
        })
    }

    /// All nodes, keyed and iterated in ascending id order.
    pub fn nodes(&self) -> &BTreeMap<NodeId, Node> {
        &self.nodes
    }

    pub fn layers(&self) -> &[Vec<NodeId>] {
        &self.layers
    }

    pub fn roots(&self) -> &[NodeId] {
        self.layers.first().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedder_id(&self) -> &str {
        &self.embedder_id
    }

    pub fn tokenizer_id(&self) -> &str {
        &self.tokenizer_id
    }

    pub fn metric(&self) -> SimilarityMetric {
        self.metric
    }

    /// Size of the widest layer. Exposed so benchmark readers can relate
    /// tree-traversal comparison counts to the layer structure.
    pub fn largest_layer(&self) -> usize {
        self.layers.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Nodes in layer-major canonical order (layer 0 first, ascending id
    /// within each layer). This is the deterministic scan order used by the
    /// collapsed-tree baseline and the file writer.
    pub fn iter_layer_major(&self) -> impl Iterator<Item = &Node> + '_ {
        self.layers
            .iter()
            .flat_map(move |layer| layer.iter().filter_map(move |id| self.nodes.get(id)))
    }
}
