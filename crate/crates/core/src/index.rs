//! Paragraph-level graph vector index.
//!
//! Main-concept articles are chunked into paragraphs, each paragraph becomes
//! a `WikiParagraph` node attached to its concept with a `HAS_PARAGRAPH`
//! edge, and the paragraph's embedding is stored on the node (graph-based
//! indexing). Retrieval scores every paragraph in the scope — a slide's main
//! concepts — by cosine similarity and returns the top k (graph-guided
//! retrieval). Scoring is exact brute force: scopes are small, and exactness
//! is what the oracle tests check against. Related-concept articles are
//! never embedded.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::embed::{Embedding, EmbeddingProvider};
use crate::graph::{Direction, EdgeKind, GraphError, KnowledgeGraph, NodeId, NodeKind, PropValue};
use crate::source::ArticleSource;
use crate::text::sentence_boundaries;

/// Chunks shorter than this merge into the following chunk.
pub const MIN_CHUNK_CHARS: usize = 40;
/// Chunks longer than this split at the nearest sentence boundary.
pub const MAX_CHUNK_CHARS: usize = 2000;

/// Prop key recording how many paragraphs were indexed for a concept; its
/// presence marks the concept as indexed.
pub const INDEXED_PROP: &str = "indexed_paragraphs";

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("main concept {title:?} is not indexed")]
    NotIndexed { title: String },
    #[error("retrieval scope is empty")]
    EmptyScope,
    #[error("embedding failed: {message}")]
    Embedding { message: String },
}

/// A retrieved paragraph with its similarity score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredParagraph {
    pub wp_node_id: NodeId,
    pub mc_title: String,
    pub paragraph_index: usize,
    pub paragraph_text: String,
    /// Cosine similarity in [-1, 1].
    pub score: f64,
}

/// Splits article text into paragraph chunks.
///
/// Blank lines separate paragraphs; each chunk is trimmed. Chunks shorter
/// than [`MIN_CHUNK_CHARS`] are merged into the chunk that follows them, and
/// chunks longer than [`MAX_CHUNK_CHARS`] are split at the sentence boundary
/// nearest the limit without exceeding it (hard-split when a single sentence
/// does). Every produced chunk fits the limit and no non-whitespace
/// character is lost.
pub fn chunk_paragraphs(article_text: &str) -> Vec<String> {
    let mut raw: Vec<String> = Vec::new();
    let mut current = String::new();
    for line in article_text.lines() {
        if line.trim().is_empty() {
            if !current.trim().is_empty() {
                raw.push(current.trim().to_string());
            }
            current.clear();
        } else {
            if !current.is_empty() {
                current.push('\n');
            }
            current.push_str(line);
        }
    }
    if !current.trim().is_empty() {
        raw.push(current.trim().to_string());
    }

    // Merge short chunks forward. A short final chunk has nothing following
    // it and stays as is.
    let mut merged: Vec<String> = Vec::new();
    let mut carry = String::new();
    for chunk in raw {
        let combined = if carry.is_empty() {
            chunk
        } else {
            let mut s = core::mem::take(&mut carry);
            s.push_str("\n\n");
            s.push_str(&chunk);
            s
        };
        if combined.chars().count() < MIN_CHUNK_CHARS {
            carry = combined;
        } else {
            merged.push(combined);
        }
    }
    if !carry.is_empty() {
        merged.push(carry);
    }

    merged
        .into_iter()
        .flat_map(|c| split_long_chunk(&c))
        .collect()
}

fn split_long_chunk(chunk: &str) -> Vec<String> {
    let len = chunk.chars().count();
    if len <= MAX_CHUNK_CHARS {
        return alloc::vec![chunk.to_string()];
    }
    // Nearest sentence boundary that keeps the head within the limit; a
    // hard split only when one run-on sentence exceeds it.
    let split_at = sentence_boundaries(chunk)
        .into_iter()
        .rfind(|&b| b > 0 && b < len && b <= MAX_CHUNK_CHARS)
        .unwrap_or(MAX_CHUNK_CHARS);
    let head: String = chunk.chars().take(split_at).collect();
    let tail: String = chunk.chars().skip(split_at).collect();
    let mut out = alloc::vec![head.trim_end().to_string()];
    let tail = tail.trim_start();
    if !tail.is_empty() {
        out.extend(split_long_chunk(tail));
    }
    out
}

/// Summary of one indexing pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexReport {
    /// Total paragraph nodes created.
    pub paragraphs_indexed: usize,
    /// Concepts indexed successfully.
    pub concepts_indexed: usize,
    /// (concept title, failure description) for concepts that were skipped;
    /// the rest of the pass proceeds.
    pub failures: Vec<(String, String)>,
}

/// Main-concept ids reachable from a learning-material node, one entry per
/// concept, in slide order then extraction order.
pub fn material_concepts(graph: &KnowledgeGraph, lm: NodeId) -> Result<Vec<NodeId>, GraphError> {
    let mut seen = alloc::collections::BTreeSet::new();
    let mut out = Vec::new();
    for slide in graph.neighbor_ids(lm, EdgeKind::Contains, Direction::Out)? {
        for mc in graph.neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)? {
            if seen.insert(mc) {
                out.push(mc);
            }
        }
    }
    Ok(out)
}

/// Builds (or rebuilds) the paragraph index for every main concept reachable
/// from `lm`. Returns how many paragraph nodes were created.
///
/// Per concept the swap is atomic: prior paragraph nodes are removed and the
/// new set inserted in one mutation, so a failed fetch or embedding leaves
/// that concept's previous index untouched and is reported instead.
pub fn index_material(
    graph: &mut KnowledgeGraph,
    lm: NodeId,
    source: &dyn ArticleSource,
    provider: &dyn EmbeddingProvider,
) -> Result<IndexReport, IndexError> {
    let mut report = IndexReport::default();
    for mc in material_concepts(graph, lm)? {
        let node = graph.node(mc).expect("concept id from traversal");
        let title = node
            .prop_str("article_title")
            .unwrap_or_default()
            .to_string();
        let name = node
            .prop_str("concept_name")
            .unwrap_or_default()
            .to_string();
        if title.is_empty() {
            log::warn!("index: concept {name:?} has no article tag; skipped");
            report.failures.push((name, "no article tag".to_string()));
            continue;
        }
        let article = match source.fetch(&title) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("index: fetch failed for {title:?}: {e}");
                report.failures.push((title, e.to_string()));
                continue;
            }
        };
        let chunks = chunk_paragraphs(&article.text);
        let embeddings = match provider.embed_batch(&chunks) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("index: embedding failed for {title:?}: {e}");
                report.failures.push((title, e.to_string()));
                continue;
            }
        };

        // Swap: drop the concept's old paragraphs, then attach the new set.
        for old in graph.neighbor_ids(mc, EdgeKind::HasParagraph, Direction::Out)? {
            graph.remove_node(old)?;
        }
        for (i, (chunk, embedding)) in chunks.iter().zip(embeddings).enumerate() {
            let mut props = crate::graph::Props::new();
            props.insert("paragraph_text".to_string(), PropValue::Str(chunk.clone()));
            props.insert("paragraph_index".to_string(), PropValue::Int(i as i64));
            let wp = graph.add_node(NodeKind::WikiParagraph, props)?;
            graph.set_embedding(wp, Some(embedding.normalized().into_values()))?;
            graph.add_edge(mc, EdgeKind::HasParagraph, wp)?;
        }
        graph.set_prop(mc, INDEXED_PROP, PropValue::Int(chunks.len() as i64))?;
        report.paragraphs_indexed += chunks.len();
        report.concepts_indexed += 1;
    }
    Ok(report)
}

/// Scores every indexed paragraph of the scope concepts against the query
/// and returns the best `k`, sorted by score descending with ties broken by
/// (concept title, paragraph index) ascending.
pub fn top_k(
    query: &str,
    k: usize,
    scope: &[NodeId],
    graph: &KnowledgeGraph,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredParagraph>, IndexError> {
    if scope.is_empty() {
        return Err(IndexError::EmptyScope);
    }
    let query_embedding = provider
        .embed_one(query)
        .map_err(|e| IndexError::Embedding {
            message: e.to_string(),
        })?
        .normalized();

    let mut scored: Vec<ScoredParagraph> = Vec::new();
    for &mc in scope {
        let node = graph.node(mc).ok_or(GraphError::NotFound { id: mc })?;
        let title = node
            .prop_str("article_title")
            .unwrap_or_default()
            .to_string();
        if node.prop_int(INDEXED_PROP).is_none() {
            let label = if title.is_empty() {
                node.prop_str("concept_name")
                    .unwrap_or_default()
                    .to_string()
            } else {
                title
            };
            return Err(IndexError::NotIndexed { title: label });
        }
        for wp in graph.neighbors(mc, EdgeKind::HasParagraph, Direction::Out)? {
            let values = wp.embedding.clone().unwrap_or_default();
            let stored = Embedding::new(values);
            let score = crate::embed::cosine(&query_embedding, &stored).map_err(|e| {
                IndexError::Embedding {
                    message: e.to_string(),
                }
            })?;
            scored.push(ScoredParagraph {
                wp_node_id: wp.id,
                mc_title: title.clone(),
                paragraph_index: wp.prop_int("paragraph_index").unwrap_or(0) as usize,
                paragraph_text: wp
                    .prop_str("paragraph_text")
                    .unwrap_or_default()
                    .to_string(),
                score,
            });
        }
    }
    sort_scored(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// Score descending, ties by (concept title, paragraph index) ascending.
pub fn sort_scored(scored: &mut [ScoredParagraph]) {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.mc_title.cmp(&b.mc_title))
            .then_with(|| a.paragraph_index.cmp(&b.paragraph_index))
    });
}
