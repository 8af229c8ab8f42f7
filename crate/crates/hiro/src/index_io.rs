//! Index file format: a single JSON document, UTF-8.
//!
//! ```json
//! {"version": 1, "dim": 2, "embedder_id": "...", "tokenizer_id": "...",
//!  "metric": "cosine", "nodes": [{"id": "...", "layer": 0, "parent": null,
//!  "children": [], "text": "...", "token_count": 1, "embedding": [1.0, 0.0]}]}
//! ```
//!
//! Node order in the file is irrelevant; the loader rebuilds layer lists
//! from the nodes' `layer` fields (ascending id within a layer). Embedding
//! components are written as full-precision decimal text, so a save/load
//! round trip reproduces every `f64` bit-exactly. Loading validates the
//! tree and rejects anything [`validate_index`] would flag.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Embedding, HierarchyIndex, Node, NodeId, SimilarityMetric};
use crate::validate::validate_index;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    dim: usize,
    embedder_id: String,
    tokenizer_id: String,
    metric: SimilarityMetric,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: String,
    layer: usize,
    parent: Option<String>,
    children: Vec<String>,
    text: String,
    token_count: usize,
    embedding: Vec<f64>,
}

/// Write the index as JSON. Nodes are emitted in layer-major canonical
/// order so identical indexes always produce identical bytes.
pub fn save_index<W: Write>(index: &HierarchyIndex, destination: W) -> Result<()> {
    let nodes = index
        .iter_layer_major()
        .map(|node| NodeRecord {
            id: node.id.as_str().to_string(),
            layer: node.layer,
            parent: node.parent.as_ref().map(|p| p.as_str().to_string()),
            children: node.children.iter().map(|c| c.as_str().to_string()).collect(),
            text: node.text.clone(),
            token_count: node.token_count,
            embedding: node.embedding.values().to_vec(),
        })
        .collect();
    let file = IndexFile {
        version: FORMAT_VERSION,
        dim: index.dim(),
        embedder_id: index.embedder_id().to_string(),
        tokenizer_id: index.tokenizer_id().to_string(),
        metric: index.metric(),
        nodes,
    };
    let mut writer = BufWriter::new(destination);
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Parse, rebuild layers, and validate. Malformed documents (bad JSON,
/// wrong version, embedding length disagreeing with the `dim` header) are
/// [`Error::Parse`]; well-formed documents describing a broken tree
/// (duplicate ids, bad links) are [`Error::InvalidIndex`].
pub fn load_index<R: Read>(source: R) -> Result<HierarchyIndex> {
    let file: IndexFile = serde_json::from_reader(BufReader::new(source))?;
    if file.version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported index format version {}",
            file.version
        )));
    }
    if file.dim == 0 {
        return Err(Error::Parse("dim header must be positive".into()));
    }

    let mut seen = BTreeSet::new();
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for record in file.nodes {
        if record.embedding.len() != file.dim {
            return Err(Error::Parse(format!(
                "node {:?}: embedding has {} values but dim header is {}",
                record.id,
                record.embedding.len(),
                file.dim
            )));
        }
        let id = NodeId::new(record.id)?;
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidIndex(vec![crate::validate::Violation::new(
                "duplicate-id",
                Some(id),
                "node id appears more than once in the file",
            )]));
        }
        let embedding = Embedding::new(record.embedding)
            .map_err(|e| Error::Parse(format!("node {}: {e}", id.as_str())))?;
        let parent = record.parent.map(NodeId::new).transpose()?;
        let children = record
            .children
            .into_iter()
            .map(NodeId::new)
            .collect::<Result<Vec<_>>>()?;
        nodes.push(Node {
            id,
            layer: record.layer,
            parent,
            children,
            text: record.text,
            embedding,
            token_count: record.token_count,
        });
    }

    let index = HierarchyIndex::from_parts(
        file.dim,
        file.embedder_id,
        file.tokenizer_id,
        file.metric,
        nodes,
    );
    let violations = validate_index(&index);
    if !violations.is_empty() {
        return Err(Error::InvalidIndex(violations));
    }
    Ok(index)
}

pub fn save_index_file(index: &HierarchyIndex, path: impl AsRef<Path>) -> Result<()> {
    save_index(index, File::create(path)?)
}

pub fn load_index_file(path: impl AsRef<Path>) -> Result<HierarchyIndex> {
    load_index(File::open(path)?)
}
