//! The three querying algorithms over a [`HierarchyIndex`], instrumented
//! with operation counters.
//!
//! - [`hiro_query`]: recursive HIRO. Roots above the selection threshold
//!   are earmarked; each earmarked node's children are evaluated, emitting
//!   a child when its similarity gain over its parent clears the delta
//!   threshold (or it is a leaf above the selection threshold) and
//!   recursing otherwise.
//! - [`hiro_query_iterative`]: worklist HIRO. Root-layer nodes take parent
//!   score 0, so a root whose raw similarity exceeds the delta threshold is
//!   emitted directly — an observable divergence from the recursive
//!   variant, kept intentionally.
//! - [`tree_traversal_query`] / [`collapsed_tree_query`]: the two top-k
//!   baselines.
//!
//! Similarity scores are memoized per query, so `sim_evals` counts distinct
//! nodes scored; every algorithm here scores each node at most once.
//! All ranking ties break by ascending node id for determinism.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::similarity;
use crate::types::{Embedding, HierarchyIndex, HiroParams, HiroVariant, NodeId, SimilarityMetric};

/// A query: the original text and its embedding in index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub embedding: Embedding,
}

impl Query {
    pub fn new(text: impl Into<String>, embedding: Embedding) -> Self {
        Query {
            text: text.into(),
            embedding,
        }
    }

    fn check_against(&self, index: &HierarchyIndex) -> Result<()> {
        if self.embedding.dim() != index.dim() {
            return Err(Error::Dimension {
                expected: index.dim(),
                actual: self.embedding.dim(),
            });
        }
        if self.embedding.l2_norm() == 0.0 {
            return Err(Error::DegenerateVector(
                "query embedding must have positive norm".into(),
            ));
        }
        Ok(())
    }
}

/// Emitted node set plus aggregated context and instrumentation counters.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Emission order is part of the contract: depth-first stored order for
    /// the HIRO variants, selection order for the baselines.
    pub emitted: Vec<NodeId>,
    pub context_text: String,
    /// Sum of emitted nodes' token counts; separators are not counted.
    pub context_tokens: usize,
    /// Distinct nodes whose similarity was computed.
    pub sim_evals: u64,
    /// Nodes examined by the traversal.
    pub nodes_visited: u64,
    /// Comparator invocations spent sorting candidates (baselines only).
    pub sort_comparisons: u64,
    pub wall_time: Duration,
}

impl RetrievalResult {
    fn assemble(
        emitted: Vec<NodeId>,
        index: &HierarchyIndex,
        sim_evals: u64,
        nodes_visited: u64,
        sort_comparisons: u64,
        started: Instant,
    ) -> Result<Self> {
        let (context_text, context_tokens) = aggregate_context(&emitted, index)?;
        Ok(RetrievalResult {
            emitted,
            context_text,
            context_tokens,
            sim_evals,
            nodes_visited,
            sort_comparisons,
            wall_time: started.elapsed(),
        })
    }
}

/// Join emitted node texts with a blank line, in emission order, and sum
/// their token counts (separators excluded).
pub fn aggregate_context(emitted: &[NodeId], index: &HierarchyIndex) -> Result<(String, usize)> {
    let mut text = String::new();
    let mut tokens = 0usize;
    for (i, id) in emitted.iter().enumerate() {
        let node = index.require_node(id)?;
        if i > 0 {
            text.push_str("\n\n");
        }
        text.push_str(&node.text);
        tokens += node.token_count;
    }
    Ok((text, tokens))
}

/// Per-query memoized similarity scorer.
struct Scorer<'a> {
    index: &'a HierarchyIndex,
    query: &'a Embedding,
    metric: SimilarityMetric,
    cache: HashMap<NodeId, f64>,
    sim_evals: u64,
}

impl<'a> Scorer<'a> {
    fn new(index: &'a HierarchyIndex, query: &'a Embedding) -> Self {
        Scorer {
            index,
            query,
            metric: index.metric(),
            cache: HashMap::new(),
            sim_evals: 0,
        }
    }

    fn score(&mut self, id: &NodeId) -> Result<f64> {
        if let Some(s) = self.cache.get(id) {
            return Ok(*s);
        }
        let node = self.index.require_node(id)?;
        let s = similarity(self.metric, self.query, &node.embedding)?;
        self.cache.insert(id.clone(), s);
        self.sim_evals += 1;
        Ok(s)
    }
}

/// Recursive HIRO querying.
///
/// Phase 1 earmarks every layer-0 node with similarity strictly above the
/// selection threshold, in layer order. Phase 2 evaluates children of the
/// earmarked set. Earmarked roots themselves are never emitted unless
/// `retain_parent_on_prune` retains one whose whole subtree pruned away.
///
/// The `variant` field of `params` is not consulted here; use [`run_hiro`]
/// to dispatch on it.
pub fn hiro_query(
    query: &Query,
    index: &HierarchyIndex,
    params: &HiroParams,
) -> Result<RetrievalResult> {
    let started = Instant::now();
    query.check_against(index)?;
    let mut scorer = Scorer::new(index, &query.embedding);
    let mut visited = 0u64;

    let mut earmarked = Vec::new();
    for root_id in index.roots() {
        visited += 1;
        if scorer.score(root_id)? > params.selection_threshold {
            earmarked.push(root_id.clone());
        }
    }

    let mut emitted = Vec::new();
    evaluate_children_rec(
        &mut scorer,
        index,
        params,
        &earmarked,
        &mut visited,
        &mut emitted,
    )?;
    let sim_evals = scorer.sim_evals;
    RetrievalResult::assemble(emitted, index, sim_evals, visited, 0, started)
}

/// Evaluate the children of `parents`, emitting or recursing per the HIRO
/// rules, and return emitted ids in depth-first stored order.
pub fn evaluate_children(
    query: &Query,
    parents: &[NodeId],
    index: &HierarchyIndex,
    params: &HiroParams,
) -> Result<Vec<NodeId>> {
    query.check_against(index)?;
    let mut scorer = Scorer::new(index, &query.embedding);
    let mut visited = 0u64;
    let mut emitted = Vec::new();
    evaluate_children_rec(&mut scorer, index, params, parents, &mut visited, &mut emitted)?;
    Ok(emitted)
}

fn evaluate_children_rec(
    scorer: &mut Scorer<'_>,
    index: &HierarchyIndex,
    params: &HiroParams,
    parents: &[NodeId],
    visited: &mut u64,
    out: &mut Vec<NodeId>,
) -> Result<()> {
    for parent_id in parents {
        let parent = index.require_node(parent_id)?;
        let parent_score = scorer.score(parent_id)?;
        let emitted_before = out.len();
        for child_id in &parent.children {
            *visited += 1;
            let child = index.require_node(child_id)?;
            let score = scorer.score(child_id)?;
            let delta = score - parent_score;
            if delta > params.delta_threshold
                || (child.is_leaf() && score > params.selection_threshold)
            {
                out.push(child_id.clone());
            } else {
                evaluate_children_rec(
                    scorer,
                    index,
                    params,
                    std::slice::from_ref(child_id),
                    visited,
                    out,
                )?;
            }
        }
        // A parent whose entire subtree pruned away is retained when asked.
        // Leaves have no subtree to prune and are never self-emitted here.
        if params.retain_parent_on_prune
            && !parent.children.is_empty()
            && out.len() == emitted_before
        {
            out.push(parent_id.clone());
        }
    }
    Ok(())
}

/// Iterative (worklist) HIRO querying.
///
/// Pops a node, takes its parent's similarity (0 for roots), and emits on
/// `(score > S and leaf) or (delta > Δ)`, otherwise pushes its children.
/// The worklist is LIFO with children pushed in reverse stored order, so
/// traversal order equals depth-first stored order; the emitted set itself
/// is order-independent, but aggregated context needs a deterministic order.
pub fn hiro_query_iterative(
    query: &Query,
    index: &HierarchyIndex,
    params: &HiroParams,
) -> Result<RetrievalResult> {
    let started = Instant::now();
    query.check_against(index)?;
    let mut scorer = Scorer::new(index, &query.embedding);
    let mut visited = 0u64;

    let mut worklist: Vec<NodeId> = index.roots().iter().rev().cloned().collect();
    let mut emitted = Vec::new();
    while let Some(id) = worklist.pop() {
        visited += 1;
        let node = index.require_node(&id)?;
        let parent_score = match &node.parent {
            Some(parent_id) => scorer.score(parent_id)?,
            None => 0.0,
        };
        let score = scorer.score(&id)?;
        let delta = score - parent_score;
        if (score > params.selection_threshold && node.is_leaf())
            || delta > params.delta_threshold
        {
            emitted.push(id);
        } else {
            worklist.extend(node.children.iter().rev().cloned());
        }
    }
    let sim_evals = scorer.sim_evals;
    RetrievalResult::assemble(emitted, index, sim_evals, visited, 0, started)
}

/// Dispatch to the HIRO variant named in `params`.
pub fn run_hiro(
    query: &Query,
    index: &HierarchyIndex,
    params: &HiroParams,
) -> Result<RetrievalResult> {
    match params.variant {
        HiroVariant::Recursive => hiro_query(query, index, params),
        HiroVariant::Iterative => hiro_query_iterative(query, index, params),
    }
}

/// Rank by descending score, ties by ascending node id.
fn rank(candidates: &mut [(NodeId, f64)], comparisons: &mut u64) {
    candidates.sort_by(|a, b| {
        *comparisons += 1;
        b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
    });
}

/// Tree-traversal baseline: top-k of the root layer, then repeatedly the
/// top-k among the children of the previous selection, emitting every
/// selected node layer by layer in descending-similarity order.
pub fn tree_traversal_query(
    query: &Query,
    index: &HierarchyIndex,
    k: usize,
) -> Result<RetrievalResult> {
    let started = Instant::now();
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    query.check_against(index)?;
    let mut scorer = Scorer::new(index, &query.embedding);
    let mut visited = 0u64;
    let mut comparisons = 0u64;
    let mut emitted = Vec::new();

    let mut frontier: Vec<NodeId> = index.roots().to_vec();
    while !frontier.is_empty() {
        let mut scored = Vec::with_capacity(frontier.len());
        for id in &frontier {
            visited += 1;
            let s = scorer.score(id)?;
            scored.push((id.clone(), s));
        }
        rank(&mut scored, &mut comparisons);
        scored.truncate(k);
        frontier = Vec::new();
        for (id, _) in &scored {
            frontier.extend(index.require_node(id)?.children.iter().cloned());
        }
        emitted.extend(scored.into_iter().map(|(id, _)| id));
    }
    let sim_evals = scorer.sim_evals;
    RetrievalResult::assemble(emitted, index, sim_evals, visited, comparisons, started)
}

/// Collapsed-tree baseline: score every node, sort globally, take the top
/// k. With a token cap, nodes are taken in sorted order while the
/// cumulative token count fits; an overflowing node is skipped and the
/// scan continues to smaller nodes (greedy fill), still at most k nodes.
pub fn collapsed_tree_query(
    query: &Query,
    index: &HierarchyIndex,
    k: usize,
    token_cap: Option<usize>,
) -> Result<RetrievalResult> {
    let started = Instant::now();
    if k == 0 {
        return Err(Error::Domain("k must be >= 1".into()));
    }
    if token_cap == Some(0) {
        return Err(Error::Domain("token_cap must be >= 1 when set".into()));
    }
    query.check_against(index)?;
    let mut scorer = Scorer::new(index, &query.embedding);
    let mut visited = 0u64;
    let mut comparisons = 0u64;

    let mut scored = Vec::with_capacity(index.len());
    for node in index.iter_layer_major() {
        visited += 1;
        let s = scorer.score(&node.id)?;
        scored.push((node.id.clone(), s));
    }
    rank(&mut scored, &mut comparisons);

    let emitted = match token_cap {
        None => scored
            .into_iter()
            .take(k)
            .map(|(id, _)| id)
            .collect::<Vec<_>>(),
        Some(cap) => {
            let mut taken = Vec::new();
            let mut budget = cap;
            for (id, _) in scored {
                if taken.len() == k {
                    break;
                }
                let cost = index.require_node(&id)?.token_count;
                if cost <= budget {
                    budget -= cost;
                    taken.push(id);
                }
            }
            taken
        }
    };
    let sim_evals = scorer.sim_evals;
    RetrievalResult::assemble(emitted, index, sim_evals, visited, comparisons, started)
}
