//! PKG-based question generation.
//!
//! When a learner marks a concept as not understood, the pipeline gathers
//! the concept's slide context from the graph, asks the chat provider for
//! candidate questions, drops near-duplicates greedily, and re-ranks the
//! survivors by embedding similarity to the slide text. Questions regenerate
//! fresh on every marking; nothing is cached.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::embed::{cosine, EmbedError, EmbeddingProvider};
use crate::gateway::{
    parse_question_list, render_p1, ChatParams, ChatProvider, GatewayError, PromptP1Context,
};
use crate::graph::{Direction, EdgeKind, GraphError, KnowledgeGraph, NodeId, NodeKind};

#[derive(Debug, Error, PartialEq)]
pub enum QgError {
    /// The learner has not marked this concept.
    #[error("no DNU mark from learner {learner} on concept {concept}")]
    NotMarked { learner: NodeId, concept: NodeId },
    #[error("concept {concept} is not on slide {slide}")]
    ConceptNotOnSlide { concept: NodeId, slide: NodeId },
    /// Two consecutive generations produced no parseable questions.
    #[error("question generation failed: provider returned no parseable questions twice")]
    GenerationFailed,
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

impl From<GatewayError> for QgError {
    fn from(e: GatewayError) -> Self {
        QgError::Gateway(e)
    }
}

/// Generation tunables.
#[derive(Debug, Clone, PartialEq)]
pub struct QgConfig {
    pub question_count: usize,
    /// Questions with cosine ≥ threshold to an already-kept question are
    /// dropped. The hash test embedder exaggerates lexical overlap, so its
    /// default is much closer to 1 than a sentence model's would be.
    pub dedup_threshold: f64,
    pub chat_params: ChatParams,
}

impl Default for QgConfig {
    fn default() -> Self {
        Self {
            question_count: 5,
            dedup_threshold: 0.999,
            chat_params: ChatParams::default(),
        }
    }
}

/// Context assembled from the learner's PKG for one DNU event.
#[derive(Debug, Clone, PartialEq)]
pub struct QgContext {
    pub learner_id: NodeId,
    pub dnu_concept_id: NodeId,
    pub dnu_concept_name: String,
    pub slide_id: NodeId,
    pub slide_text: String,
    /// Names of every main concept on the slide, in extraction order; the
    /// DNU concept is among them.
    pub slide_concepts: Vec<String>,
}

/// A generated question with its re-ranking score.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedQuestion {
    pub question_id: String,
    pub text: String,
    /// Cosine similarity between the question and the slide text.
    pub rank_score: f64,
    pub dnu_concept: NodeId,
    /// Milliseconds since the epoch, supplied by the caller.
    pub created_at: u64,
}

/// Gathers the slide context for a marked concept. The DNU edge and the
/// slide membership are both verified.
pub fn retrieve_qg_context(
    graph: &KnowledgeGraph,
    learner: NodeId,
    concept: NodeId,
    slide: NodeId,
) -> Result<QgContext, QgError> {
    if !graph.has_edge(learner, EdgeKind::Dnu, concept) {
        // Distinguish unknown ids from a missing mark.
        for id in [learner, concept] {
            if graph.node(id).is_none() {
                return Err(GraphError::NotFound { id }.into());
            }
        }
        return Err(QgError::NotMarked { learner, concept });
    }
    let slide_node = graph
        .node(slide)
        .ok_or(GraphError::NotFound { id: slide })?;
    if slide_node.kind != NodeKind::Slide {
        return Err(GraphError::SchemaViolation {
            message: alloc::format!("node {slide} is a {}, not a slide", slide_node.kind),
        }
        .into());
    }
    let mcs = graph.neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)?;
    if !mcs.contains(&concept) {
        return Err(QgError::ConceptNotOnSlide { concept, slide });
    }
    let slide_concepts = mcs
        .iter()
        .map(|id| {
            graph
                .node(*id)
                .expect("traversal id")
                .prop_str("concept_name")
                .unwrap_or_default()
                .to_string()
        })
        .collect();
    Ok(QgContext {
        learner_id: learner,
        dnu_concept_id: concept,
        dnu_concept_name: graph
            .node(concept)
            .expect("checked above")
            .prop_str("concept_name")
            .unwrap_or_default()
            .to_string(),
        slide_id: slide,
        slide_text: slide_node
            .prop_str("slide_text")
            .unwrap_or_default()
            .to_string(),
        slide_concepts,
    })
}

/// Builds the P1 prompt context for a generation run: the DNU concept plus
/// the slide's other concepts.
pub fn p1_context(ctx: &QgContext, question_count: usize) -> PromptP1Context {
    let others: Vec<String> = ctx
        .slide_concepts
        .iter()
        .filter(|name| !name.eq_ignore_ascii_case(&ctx.dnu_concept_name))
        .cloned()
        .collect();
    PromptP1Context::new(
        ctx.dnu_concept_name.clone(),
        ctx.slide_text.clone(),
        others,
        question_count,
    )
}

/// Runs one generation: render P1, complete, parse. An empty generation is
/// retried once with the same request; a second empty result fails the run.
pub fn generate_questions(
    ctx: &QgContext,
    provider: &dyn ChatProvider,
    config: &QgConfig,
) -> Result<Vec<String>, QgError> {
    let request = render_p1(&p1_context(ctx, config.question_count), &config.chat_params);
    for attempt in 0..2 {
        let text = provider.complete(&request)?;
        match parse_question_list(&text, config.question_count) {
            Ok(questions) => return Ok(questions),
            Err(GatewayError::EmptyGeneration) => {
                log::warn!(
                    "generation attempt {} for {:?} produced no questions",
                    attempt + 1,
                    ctx.dnu_concept_name
                );
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(QgError::GenerationFailed)
}

/// Greedy semantic dedup in original order: a question is dropped when its
/// cosine to any already-kept question reaches the threshold. First
/// occurrence wins.
pub fn dedup_semantic(
    questions: &[String],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<Vec<String>, QgError> {
    if questions.len() <= 1 {
        return Ok(questions.to_vec());
    }
    let embeddings = provider.embed_batch(questions)?;
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..questions.len() {
        let mut duplicate = false;
        for &j in &kept {
            if cosine(&embeddings[i], &embeddings[j])? >= threshold {
                log::info!("dedup: dropping near-duplicate question {:?}", questions[i]);
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            kept.push(i);
        }
    }
    Ok(kept.into_iter().map(|i| questions[i].clone()).collect())
}

/// Scores each question against the slide text and sorts descending; equal
/// scores keep generation order. Ids are `q{id_seed+rank}`.
pub fn rerank(
    questions: &[String],
    slide_text: &str,
    provider: &dyn EmbeddingProvider,
    dnu_concept: NodeId,
    created_at: u64,
    id_seed: u64,
) -> Result<Vec<GeneratedQuestion>, QgError> {
    let slide_embedding = provider.embed_one(slide_text)?;
    let embeddings = provider.embed_batch(questions)?;
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(questions.len());
    for (i, e) in embeddings.iter().enumerate() {
        scored.push((i, cosine(e, &slide_embedding)?));
    }
    // Stable sort: ties keep generation order.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(rank, (i, score))| GeneratedQuestion {
            question_id: alloc::format!("q{}", id_seed + rank as u64 + 1),
            text: questions[i].clone(),
            rank_score: score,
            dnu_concept,
            created_at,
        })
        .collect())
}

/// Full pipeline for one DNU event: context, generation, dedup, re-rank.
#[allow(clippy::too_many_arguments)]
pub fn generate_for_dnu(
    graph: &KnowledgeGraph,
    learner: NodeId,
    concept: NodeId,
    slide: NodeId,
    chat: &dyn ChatProvider,
    embedder: &dyn EmbeddingProvider,
    config: &QgConfig,
    created_at: u64,
    id_seed: u64,
) -> Result<Vec<GeneratedQuestion>, QgError> {
    let ctx = retrieve_qg_context(graph, learner, concept, slide)?;
    let raw = generate_questions(&ctx, chat, config)?;
    let deduped = dedup_semantic(&raw, embedder, config.dedup_threshold)?;
    rerank(
        &deduped,
        &ctx.slide_text,
        embedder,
        concept,
        created_at,
        id_seed,
    )
}
