//! Embedder contracts: a deterministic offline embedder for tests and
//! benchmarks, and a client for a remote embedding service.
//!
//! The deterministic embedder is a hashed bag of words: each whitespace
//! token adds 1 to the coordinate `stable_hash(token) mod dim` and the
//! result is L2-normalized. It is reproducible across runs and platforms
//! and stands in for a learned model wherever semantic quality does not
//! matter.
//!
//! The remote protocol is a minimal JSON POST:
//! `POST {endpoint}/embed` with body `{"texts": [..]}`, response
//! `{"embeddings": [[..]]}`, HTTP 200 on success. The env var
//! `HIRO_EMBED_ENDPOINT` overrides the configured endpoint.

use std::thread::sleep;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Embedding;

pub const ENDPOINT_ENV: &str = "HIRO_EMBED_ENDPOINT";

/// FNV-1a, 64-bit: offset basis 14695981039346656037 (0xcbf29ce484222325),
/// prime 1099511628211 (0x100000001b3), over the token's UTF-8 bytes.
///
/// This exact function is part of the deterministic embedder's contract;
/// changing it changes every produced vector.
pub fn stable_hash(token: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in token.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Hashed bag-of-tokens embedding, L2-normalized.
///
/// Token multiplicity only rescales the vector before normalization, so
/// the output depends on the token multiset shape, not on token order.
pub fn embed_deterministic(text: &str, dim: usize) -> Result<Embedding> {
    if dim == 0 {
        return Err(Error::Dimension {
            expected: 1,
            actual: 0,
        });
    }
    let mut values = vec![0.0f64; dim];
    let mut any = false;
    for token in text.split_whitespace() {
        let bucket = (stable_hash(token) % dim as u64) as usize;
        values[bucket] += 1.0;
        any = true;
    }
    if !any {
        return Err(Error::DegenerateVector(
            "cannot embed empty or whitespace-only text".into(),
        ));
    }
    Embedding::new(values)?.normalized()
}

/// Settings for resolving and driving an embedder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedderConfig {
    /// `"deterministic"` or `"remote"`.
    pub embedder_id: String,
    pub dim: usize,
    /// Required iff `embedder_id == "remote"` (unless the env var is set).
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

impl EmbedderConfig {
    pub fn deterministic(dim: usize) -> Self {
        EmbedderConfig {
            embedder_id: "deterministic".into(),
            dim,
            endpoint: None,
            batch_size: 32,
            timeout_ms: 10_000,
            max_retries: 2,
        }
    }

    pub fn remote(endpoint: impl Into<String>, dim: usize) -> Self {
        EmbedderConfig {
            embedder_id: "remote".into(),
            dim,
            endpoint: Some(endpoint.into()),
            batch_size: 32,
            timeout_ms: 10_000,
            max_retries: 2,
        }
    }
}

pub trait TextEmbedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding>;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub struct DeterministicEmbedder {
    dim: usize,
}

impl DeterministicEmbedder {
    pub fn new(dim: usize) -> Self {
        DeterministicEmbedder { dim }
    }
}

impl TextEmbedder for DeterministicEmbedder {
    fn id(&self) -> &str {
        "deterministic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        embed_deterministic(text, self.dim)
    }
}

pub struct RemoteEmbedder {
    config: EmbedderConfig,
}

impl RemoteEmbedder {
    pub fn new(config: EmbedderConfig) -> Self {
        RemoteEmbedder { config }
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn id(&self) -> &str {
        "remote"
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut out = embed_batch_remote(std::slice::from_ref(&text.to_string()), &self.config)?;
        out.pop()
            .ok_or_else(|| Error::EmbedService("service returned no embedding".into()))
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        embed_batch_remote(texts, &self.config)
    }
}

/// Instantiate the embedder named by the config.
pub fn resolve_embedder(config: &EmbedderConfig) -> Result<Box<dyn TextEmbedder>> {
    match config.embedder_id.as_str() {
        "deterministic" => Ok(Box::new(DeterministicEmbedder::new(config.dim))),
        "remote" => Ok(Box::new(RemoteEmbedder::new(config.clone()))),
        other => Err(Error::UnknownEmbedder(other.to_string())),
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Embed texts through the remote service, one result per input in input
/// order. Requests are chunked into batches of `batch_size`; transport and
/// HTTP failures are retried up to `max_retries` per batch with exponential
/// backoff. A response whose embedding count or dimension disagrees with
/// the request is a contract violation and fails immediately.
pub fn embed_batch_remote(texts: &[String], config: &EmbedderConfig) -> Result<Vec<Embedding>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    if config.batch_size == 0 {
        return Err(Error::EmbedService("batch_size must be >= 1".into()));
    }
    if let Some(empty) = texts.iter().find(|t| t.trim().is_empty()) {
        return Err(Error::DegenerateVector(format!(
            "cannot embed empty text {empty:?}"
        )));
    }
    let endpoint = std::env::var(ENDPOINT_ENV)
        .ok()
        .or_else(|| config.endpoint.clone())
        .ok_or_else(|| {
            Error::EmbedService(format!(
                "no endpoint configured and {ENDPOINT_ENV} is not set"
            ))
        })?;
    let url = format!("{}/embed", endpoint.trim_end_matches('/'));

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
        .build()
        .into();

    let mut out = Vec::with_capacity(texts.len());
    for batch in texts.chunks(config.batch_size) {
        let response = send_with_retries(&agent, &url, batch, config.max_retries)?;
        if response.embeddings.len() != batch.len() {
            return Err(Error::EmbedService(format!(
                "requested {} embeddings, got {}",
                batch.len(),
                response.embeddings.len()
            )));
        }
        for values in response.embeddings {
            if values.len() != config.dim {
                return Err(Error::Dimension {
                    expected: config.dim,
                    actual: values.len(),
                });
            }
            out.push(Embedding::new(values)?);
        }
    }
    Ok(out)
}

fn send_with_retries(
    agent: &ureq::Agent,
    url: &str,
    batch: &[String],
    max_retries: u32,
) -> Result<EmbedResponse> {
    let mut attempt = 0;
    loop {
        match send_once(agent, url, batch) {
            Ok(resp) => return Ok(resp),
            Err(e) if attempt < max_retries => {
                sleep(Duration::from_millis(25u64 << attempt.min(8)));
                attempt += 1;
                let _ = e;
            }
            Err(e) => return Err(Error::EmbedService(format!("after {attempt} retries: {e}"))),
        }
    }
}

fn send_once(
    agent: &ureq::Agent,
    url: &str,
    batch: &[String],
) -> std::result::Result<EmbedResponse, ureq::Error> {
    let mut response = agent.post(url).send_json(EmbedRequest { texts: batch })?;
    response.body_mut().read_json::<EmbedResponse>()
}
