//! Builds a [`HierarchyIndex`] from raw documents: chunking, bottom-up
//! fan-out grouping, and summarization via a pluggable contract.
//!
//! Grouping is deliberately structural: consecutive runs of `fan_out`
//! children per parent, repeated until one layer of at most `fan_out`
//! nodes remains. Those nodes become the layer-0 roots; a multi-node root
//! layer is a first-class forest. Semantic clustering is out of scope —
//! what matters here is producing valid layered trees deterministically.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::embedding::{resolve_embedder, EmbedderConfig, TextEmbedder};
use crate::error::{Error, Result};
use crate::tokenize::{tokenizer, Tokenizer};
use crate::types::{HierarchyIndex, Node, NodeId};

/// Settings for one index build.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Maximum tokens per leaf chunk; also the token budget handed to the
    /// summarizer for parent texts, so no node outgrows a chunk.
    pub chunk_token_limit: usize,
    /// Children grouped under each parent; >= 2.
    pub fan_out: usize,
    pub summarizer_id: String,
    pub embedder: EmbedderConfig,
    pub tokenizer_id: String,
    /// Similarity metric recorded on the built index.
    pub metric: crate::types::SimilarityMetric,
}

impl BuildConfig {
    pub fn new(chunk_token_limit: usize, fan_out: usize, embedder: EmbedderConfig) -> Self {
        BuildConfig {
            chunk_token_limit,
            fan_out,
            summarizer_id: CONCAT_TRUNCATE.to_string(),
            embedder,
            tokenizer_id: crate::tokenize::WHITESPACE.to_string(),
            metric: crate::types::SimilarityMetric::Cosine,
        }
    }

    fn check(&self) -> Result<()> {
        if self.chunk_token_limit == 0 {
            return Err(Error::Domain("chunk_token_limit must be >= 1".into()));
        }
        if self.fan_out < 2 {
            return Err(Error::Domain("fan_out must be >= 2".into()));
        }
        Ok(())
    }
}

/// Byte range of each token span within the original text. Tokenizer spans
/// borrow from the input, so offsets come from pointer arithmetic.
fn token_ranges(text: &str, tok: &dyn Tokenizer) -> Vec<(usize, usize)> {
    let base = text.as_ptr() as usize;
    tok.tokenize(text)
        .into_iter()
        .map(|span| {
            let start = span.as_ptr() as usize - base;
            (start, start + span.len())
        })
        .collect()
}

/// Split a document into chunks of at most `chunk_token_limit` tokens.
///
/// A boundary prefers the last sentence-ending token (`.`, `!`, `?`)
/// inside the window when one exists, else hard-splits at the limit. Each
/// chunk is a verbatim slice of the document between its first and last
/// token, so token content and order are preserved exactly.
pub fn chunk_text(
    document: &str,
    chunk_token_limit: usize,
    tokenizer_id: &str,
) -> Result<Vec<String>> {
    if chunk_token_limit == 0 {
        return Err(Error::Domain("chunk_token_limit must be >= 1".into()));
    }
    let tok = tokenizer(tokenizer_id)?;
    let ranges = token_ranges(document, tok.as_ref());
    if ranges.is_empty() {
        return Err(Error::EmptyDocument("document has no tokens".into()));
    }

    let ends_sentence = |range: &(usize, usize)| {
        matches!(
            document[range.0..range.1].chars().last(),
            Some('.' | '!' | '?')
        )
    };

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < ranges.len() {
        let window = (ranges.len() - start).min(chunk_token_limit);
        let take = if start + window == ranges.len() {
            // remainder fits; no boundary needed
            window
        } else {
            match (0..window).rev().find(|i| ends_sentence(&ranges[start + i])) {
                Some(last_sentence_end) => last_sentence_end + 1,
                None => window,
            }
        };
        let first = ranges[start];
        let last = ranges[start + take - 1];
        chunks.push(document[first.0..last.1].to_string());
        start += take;
    }
    Ok(chunks)
}

pub const CONCAT_TRUNCATE: &str = "concat-truncate";

/// Summarizer contract, keyed by id like tokenizers and embedders.
pub trait Summarizer: Send + Sync {
    fn id(&self) -> &str;
    fn summarize(
        &self,
        texts: &[String],
        token_budget: usize,
        tokenizer_id: &str,
    ) -> Result<String>;
}

/// Concatenate inputs in order and keep the first `token_budget` tokens.
pub struct ConcatTruncate;

impl Summarizer for ConcatTruncate {
    fn id(&self) -> &str {
        CONCAT_TRUNCATE
    }

    fn summarize(
        &self,
        texts: &[String],
        token_budget: usize,
        tokenizer_id: &str,
    ) -> Result<String> {
        default_summarize(texts, token_budget, tokenizer_id)
    }
}

/// The built-in summarizer: concatenate in order, truncate to the first
/// `token_budget` tokens. Deterministic; errors when nothing survives.
pub fn default_summarize(
    texts: &[String],
    token_budget: usize,
    tokenizer_id: &str,
) -> Result<String> {
    if texts.is_empty() {
        return Err(Error::EmptyDocument("nothing to summarize".into()));
    }
    let tok = tokenizer(tokenizer_id)?;
    let joined = texts.join(" ");
    let ranges = token_ranges(&joined, tok.as_ref());
    if ranges.is_empty() || token_budget == 0 {
        return Err(Error::EmptyDocument(
            "summary would contain no tokens".into(),
        ));
    }
    let last = ranges[ranges.len().min(token_budget) - 1];
    let first = ranges[0];
    Ok(joined[first.0..last.1].to_string())
}

fn summarizer_registry() -> &'static RwLock<HashMap<String, Arc<dyn Summarizer>>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, Arc<dyn Summarizer>>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: HashMap<String, Arc<dyn Summarizer>> = HashMap::new();
        map.insert(CONCAT_TRUNCATE.to_string(), Arc::new(ConcatTruncate));
        RwLock::new(map)
    })
}

pub fn register_summarizer(summarizer: Arc<dyn Summarizer>) {
    summarizer_registry()
        .write()
        .expect("summarizer registry poisoned")
        .insert(summarizer.id().to_string(), summarizer);
}

pub fn summarizer(id: &str) -> Result<Arc<dyn Summarizer>> {
    summarizer_registry()
        .read()
        .expect("summarizer registry poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| Error::UnknownSummarizer(id.to_string()))
}

/// Build a validated index from chunks using the embedder named in the
/// config. Leaves are the chunks in order at the deepest layer.
pub fn build_hierarchy(chunks: &[String], config: &BuildConfig) -> Result<HierarchyIndex> {
    let embedder = resolve_embedder(&config.embedder)?;
    build_hierarchy_with(chunks, config, embedder.as_ref())
}

/// [`build_hierarchy`] with an explicit embedder, for callers that swap in
/// a non-registered one (e.g. seeded random embeddings in benchmarks).
pub fn build_hierarchy_with(
    chunks: &[String],
    config: &BuildConfig,
    embedder: &dyn TextEmbedder,
) -> Result<HierarchyIndex> {
    config.check()?;
    if chunks.is_empty() {
        return Err(Error::EmptyDocument("no chunks to index".into()));
    }
    let tok = tokenizer(&config.tokenizer_id)?;
    let summ = summarizer(&config.summarizer_id)?;
    for (i, chunk) in chunks.iter().enumerate() {
        if tok.count(chunk) == 0 {
            return Err(Error::EmptyDocument(format!("chunk {i} has no tokens")));
        }
    }

    // Bottom-up levels of node texts: level 0 = leaves, last level = roots.
    let mut levels: Vec<Vec<String>> = vec![chunks.to_vec()];
    while levels.last().unwrap().len() > config.fan_out {
        let below = levels.last().unwrap();
        let mut level = Vec::with_capacity(below.len().div_ceil(config.fan_out));
        for group in below.chunks(config.fan_out) {
            level.push(summ.summarize(group, config.chunk_token_limit, &config.tokenizer_id)?);
        }
        levels.push(level);
    }

    let n_levels = levels.len();
    let layer_of_level = |level: usize| n_levels - 1 - level;

    // Ids: leaves keep chunk order, parents keep bottom-up creation order.
    // Zero-padding makes ascending id order equal creation order per layer.
    let mut ids: Vec<Vec<NodeId>> = Vec::with_capacity(n_levels);
    ids.push(
        (0..levels[0].len())
            .map(|i| NodeId::new(format!("c{i:08}")).expect("generated id"))
            .collect(),
    );
    let mut parent_seq = 0usize;
    for level in levels.iter().skip(1) {
        let level_ids = (0..level.len())
            .map(|_| {
                let id = NodeId::new(format!("s{parent_seq:08}")).expect("generated id");
                parent_seq += 1;
                id
            })
            .collect();
        ids.push(level_ids);
    }

    let mut nodes: Vec<Node> = Vec::new();
    for (level, texts) in levels.iter().enumerate() {
        let embeddings = embedder.embed_batch(texts)?;
        if let Some(bad) = embeddings.iter().find(|e| e.dim() != config.embedder.dim) {
            return Err(Error::Dimension {
                expected: config.embedder.dim,
                actual: bad.dim(),
            });
        }
        for (i, (text, embedding)) in texts.iter().zip(embeddings).enumerate() {
            let parent = if level + 1 < n_levels {
                Some(ids[level + 1][i / config.fan_out].clone())
            } else {
                None
            };
            let children = if level == 0 {
                Vec::new()
            } else {
                let lo = i * config.fan_out;
                let hi = (lo + config.fan_out).min(ids[level - 1].len());
                ids[level - 1][lo..hi].to_vec()
            };
            nodes.push(Node {
                id: ids[level][i].clone(),
                layer: layer_of_level(level),
                parent,
                children,
                text: text.clone(),
                embedding,
                token_count: tok.count(text),
            });
        }
    }

    HierarchyIndex::new(
        config.embedder.dim,
        embedder.id(),
        config.tokenizer_id.clone(),
        config.metric,
        nodes,
    )
}

/// Closed-form node count for `n` leaves under fan-out `f`:
/// `n + ⌈n/f⌉ + ⌈⌈n/f⌉/f⌉ + …` until a level of size <= f.
pub fn expected_node_count(n_leaves: usize, fan_out: usize) -> usize {
    let mut total = n_leaves;
    let mut level = n_leaves;
    while level > fan_out {
        level = level.div_ceil(fan_out);
        total += level;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::WHITESPACE;

    fn build_cfg(fan_out: usize) -> BuildConfig {
        BuildConfig::new(32, fan_out, EmbedderConfig::deterministic(8))
    }

    #[test]
    fn chunk_under_limit_is_identity() {
        let chunks = chunk_text("three token doc", 10, WHITESPACE).unwrap();
        assert_eq!(chunks, vec!["three token doc"]);
    }

    #[test]
    fn chunk_prefers_sentence_ends() {
        // ten single-token sentences, limit 3 -> 3,3,3,1
        let doc = "a. b. c. d. e. f. g. h. i. j.";
        let chunks = chunk_text(doc, 3, WHITESPACE).unwrap();
        let sizes: Vec<usize> = chunks
            .iter()
            .map(|c| c.split_whitespace().count())
            .collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        assert_eq!(chunks[0], "a. b. c.");
        assert_eq!(chunks[3], "j.");
    }

    #[test]
    fn chunk_hard_splits_without_punctuation() {
        let chunks = chunk_text("a b c d e f g", 3, WHITESPACE).unwrap();
        let sizes: Vec<usize> = chunks
            .iter()
            .map(|c| c.split_whitespace().count())
            .collect();
        assert_eq!(sizes, vec![3, 3, 1]);
    }

    #[test]
    fn chunk_mid_window_sentence_end() {
        let chunks = chunk_text("a. b c d e", 4, WHITESPACE).unwrap();
        assert_eq!(chunks, vec!["a.", "b c d e"]);
    }

    #[test]
    fn chunk_rejects_empty_document() {
        assert!(matches!(
            chunk_text("  \n ", 3, WHITESPACE),
            Err(Error::EmptyDocument(_))
        ));
    }

    #[test]
    fn summarize_under_and_over_budget() {
        let texts = vec!["a b".to_string(), "c".to_string()];
        assert_eq!(default_summarize(&texts, 10, WHITESPACE).unwrap(), "a b c");

        let texts = vec!["a b".to_string(), "c d".to_string()];
        assert_eq!(default_summarize(&texts, 3, WHITESPACE).unwrap(), "a b c");

        assert!(matches!(
            default_summarize(&["".to_string()], 5, WHITESPACE),
            Err(Error::EmptyDocument(_))
        ));
    }

    #[test]
    fn single_chunk_builds_single_root_leaf() {
        let index = build_hierarchy(&["only chunk".to_string()], &build_cfg(2)).unwrap();
        assert_eq!(index.len(), 1);
        assert_eq!(index.layers().len(), 1);
        let root = index.node(&index.roots()[0]).unwrap();
        assert!(root.is_leaf());
        assert_eq!(root.text, "only chunk");
    }

    #[test]
    fn four_chunks_fan_out_two() {
        let chunks: Vec<String> = (0..4).map(|i| format!("chunk number {i}")).collect();
        let index = build_hierarchy(&chunks, &build_cfg(2)).unwrap();
        assert_eq!(index.len(), 6);
        assert_eq!(index.layers().len(), 2);
        assert_eq!(index.layers()[0].len(), 2);
        assert_eq!(index.layers()[1].len(), 4);
    }

    #[test]
    fn five_chunks_fan_out_two() {
        let chunks: Vec<String> = (0..5).map(|i| format!("chunk number {i}")).collect();
        let index = build_hierarchy(&chunks, &build_cfg(2)).unwrap();
        assert_eq!(index.len(), 10);
        let widths: Vec<usize> = index.layers().iter().map(Vec::len).collect();
        assert_eq!(widths, vec![2, 3, 5]);
    }

    #[test]
    fn leaf_layer_preserves_chunk_order() {
        let chunks: Vec<String> = (0..7).map(|i| format!("piece {i}")).collect();
        let index = build_hierarchy(&chunks, &build_cfg(3)).unwrap();
        let leaf_layer = index.layers().last().unwrap();
        let texts: Vec<&str> = leaf_layer
            .iter()
            .map(|id| index.node(id).unwrap().text.as_str())
            .collect();
        assert_eq!(texts, chunks.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn node_count_formula_examples() {
        assert_eq!(expected_node_count(1, 2), 1);
        assert_eq!(expected_node_count(4, 2), 6);
        assert_eq!(expected_node_count(5, 2), 10);
        assert_eq!(expected_node_count(2, 2), 2);
    }
}
