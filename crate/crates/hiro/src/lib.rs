//! Hierarchical retrieval engine.
//!
//! The centerpiece is HIRO querying: a depth-first descent over a layered
//! summary tree that emits a node when its similarity gain over its parent
//! clears a delta threshold, pruning every branch that never clears it.
//! Around it sit the pieces needed to exercise it end to end:
//!
//! - [`types`] / [`similarity`] / [`validate`] / [`index_io`] / [`tokenize`]:
//!   the layered index, similarity math, invariant checking, and the JSON
//!   index file format.
//! - [`embedding`]: a deterministic hashed bag-of-words embedder plus a
//!   remote embedding-service client.
//! - [`indexer`]: chunking and bottom-up fan-out tree construction with a
//!   pluggable summarizer.
//! - [`retrieval`]: HIRO (recursive and iterative variants) and the two
//!   top-k baselines (tree traversal, collapsed tree), instrumented with
//!   operation counters.
//! - [`evaluation`]: ROUGE-L, BLEU, a METEOR variant, classification
//!   metrics, log-of-context-length efficiency adjustment, and the batch
//!   evaluation loop.
//! - [`tuning`]: seeded Bayesian optimization of the two HIRO thresholds.
//! - [`bench`]: synthetic-tree scaling benchmarks driven by operation
//!   counts rather than wall clock.

pub mod bench;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod index_io;
pub mod indexer;
pub mod retrieval;
pub mod similarity;
pub mod tokenize;
pub mod tuning;
pub mod types;
pub mod validate;

pub use error::{Error, Result};
pub use index_io::{load_index, load_index_file, save_index, save_index_file};
pub use retrieval::{
    aggregate_context, collapsed_tree_query, evaluate_children, hiro_query, hiro_query_iterative,
    tree_traversal_query, Query, RetrievalResult,
};
pub use similarity::{cosine_similarity, similarity};
pub use tokenize::count_tokens;
pub use types::{
    Embedding, HierarchyIndex, HiroParams, HiroVariant, Node, NodeId, SimilarityMetric,
};
pub use validate::{validate_index, Violation};
