//! EduKG-based question answering.
//!
//! Tier 1 retrieves the slide's indexed article paragraphs and asks the chat
//! provider to extract answers verbatim (P2). Grounding is enforced
//! mechanically, not just by prompt: any answer that is not a
//! whitespace-normalized substring of its cited context is discarded. When
//! tier 1 yields nothing, tier 2 pools the slide's related concepts, lets
//! the provider pick one (P3), loads that article whole, and extracts from
//! its windows. Every surfaced answer carries a citation span that slices
//! back to the answer text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::embed::EmbeddingProvider;
use crate::gateway::{
    render_p2, render_p3, ChatParams, ChatProvider, GatewayError, LabeledContext, ParsedAnswer,
    PromptP2Context, PromptP3Context, RcCandidate, NONE_SENTINEL,
};
use crate::graph::{Direction, EdgeKind, GraphError, KnowledgeGraph, NodeId};
use crate::index::{chunk_paragraphs, top_k, IndexError, ScoredParagraph};
use crate::source::{ArticleSource, SourceError};
use crate::text::normalized_find;

#[derive(Debug, Error, PartialEq)]
pub enum QaError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Source(#[from] SourceError),
    /// A grounded answer failed to locate in its source; unreachable unless
    /// the grounding filter and the locator disagree.
    #[error("internal: grounded answer not found in source text")]
    CitationNotFound,
}

impl From<GatewayError> for QaError {
    fn from(e: GatewayError) -> Self {
        QaError::Gateway(e)
    }
}

/// Which retrieval stage produced an answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerTier {
    McParagraph,
    RcArticle,
}

/// What part of the source article a citation points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceRef {
    Paragraph(usize),
    WholeArticle,
}

/// An extracted answer with its citation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerWithCitation {
    pub answer_text: String,
    pub source_article_title: String,
    pub source: SourceRef,
    /// Character (not byte) offsets into the cited source text.
    pub span_start: usize,
    pub span_end: usize,
    pub tier: AnswerTier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerStatus {
    Answered,
    NoAnswer,
}

/// Outcome of answering one question.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSet {
    pub question_id: String,
    pub answers: Vec<AnswerWithCitation>,
    pub status: AnswerStatus,
}

impl AnswerSet {
    fn answered(question_id: String, answers: Vec<AnswerWithCitation>) -> Self {
        debug_assert!(!answers.is_empty());
        Self {
            question_id,
            answers,
            status: AnswerStatus::Answered,
        }
    }

    fn no_answer(question_id: String) -> Self {
        Self {
            question_id,
            answers: Vec::new(),
            status: AnswerStatus::NoAnswer,
        }
    }
}

/// Answering tunables.
#[derive(Debug, Clone, PartialEq)]
pub struct QaConfig {
    /// Paragraphs retrieved per question.
    pub retrieval_k: usize,
    /// Similarity below which a paragraph does not count as relevant.
    pub similarity_floor: f64,
    /// Cap on related-concept candidates offered to the P3 prompt.
    pub rc_candidate_cap: usize,
    pub chat_params: ChatParams,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            retrieval_k: 5,
            similarity_floor: 0.15,
            rc_candidate_cap: 50,
            chat_params: ChatParams::default(),
        }
    }
}

/// Tagged main concepts of a slide, in extraction order. Untagged concepts
/// have no article and therefore nothing in the index.
pub fn slide_scope(graph: &KnowledgeGraph, slide: NodeId) -> Result<Vec<NodeId>, QaError> {
    let mcs = graph.neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)?;
    Ok(mcs
        .into_iter()
        .filter(|id| {
            graph
                .node(*id)
                .and_then(|n| n.prop_str("article_title"))
                .is_some_and(|t| !t.is_empty())
        })
        .collect())
}

/// Retrieves the slide-scoped paragraphs most similar to the question,
/// dropping results under the similarity floor.
pub fn retrieve_contexts(
    question: &str,
    slide: NodeId,
    graph: &KnowledgeGraph,
    provider: &dyn EmbeddingProvider,
    config: &QaConfig,
) -> Result<Vec<ScoredParagraph>, QaError> {
    let scope = slide_scope(graph, slide)?;
    if scope.is_empty() {
        log::warn!("retrieve: slide {slide} has no tagged concepts; nothing to retrieve");
        return Ok(Vec::new());
    }
    let hits = top_k(question, config.retrieval_k, &scope, graph, provider)?;
    Ok(hits
        .into_iter()
        .filter(|h| h.score >= config.similarity_floor)
        .collect())
}

/// An answer grounded in one of the provided contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedAnswer {
    /// Index into the context list handed to [`extract_answers`].
    pub context_index: usize,
    pub answer_text: String,
}

/// Extraction outcome: grounded answers, or nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractOutcome {
    Answers(Vec<GroundedAnswer>),
    NoAnswer,
}

/// Runs the extractive prompt over labeled contexts and enforces grounding:
/// answers that are not whitespace-normalized substrings of their cited
/// context are discarded with a warning. A malformed completion is retried
/// once before failing.
pub fn extract_answers(
    question: &str,
    contexts: &[String],
    chat: &dyn ChatProvider,
    params: &ChatParams,
) -> Result<ExtractOutcome, QaError> {
    debug_assert!(!contexts.is_empty());
    let labeled: Vec<LabeledContext> = contexts
        .iter()
        .enumerate()
        .map(|(i, text)| LabeledContext {
            source_label: alloc::format!("C{}", i + 1),
            text: text.clone(),
        })
        .collect();
    let labels: Vec<String> = labeled.iter().map(|c| c.source_label.clone()).collect();
    let request = render_p2(
        &PromptP2Context {
            question: question.to_string(),
            contexts: labeled,
        },
        params,
    );

    let mut parsed = None;
    for attempt in 0..2 {
        let text = chat.complete(&request)?;
        match crate::gateway::parse_answer(&text, &labels) {
            Ok(p) => {
                parsed = Some(p);
                break;
            }
            Err(GatewayError::MalformedAnswer { message }) if attempt == 0 => {
                log::warn!("extract: malformed answer ({message}); retrying once");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let Some(parsed) = parsed else {
        return Err(GatewayError::MalformedAnswer {
            message: "malformed after retry".to_string(),
        }
        .into());
    };

    match parsed {
        ParsedAnswer::NoAnswer => Ok(ExtractOutcome::NoAnswer),
        ParsedAnswer::Answers(list) => {
            let mut grounded = Vec::new();
            for answer in list {
                let index = labels
                    .iter()
                    .position(|l| *l == answer.source_label)
                    .expect("parser only returns known labels");
                if normalized_find(&contexts[index], &answer.answer_text).is_some() {
                    grounded.push(GroundedAnswer {
                        context_index: index,
                        answer_text: answer.answer_text,
                    });
                } else {
                    log::warn!(
                        "grounding violation: answer {:?} is not a substring of context {}",
                        answer.answer_text,
                        answer.source_label
                    );
                }
            }
            if grounded.is_empty() {
                Ok(ExtractOutcome::NoAnswer)
            } else {
                Ok(ExtractOutcome::Answers(grounded))
            }
        }
    }
}

/// Pools the related concepts of every concept on the slide: link order
/// within each concept, round-robin across concepts, deduplicated, capped.
pub fn pooled_rc_candidates(
    graph: &KnowledgeGraph,
    slide: NodeId,
    cap: usize,
) -> Result<Vec<RcCandidate>, QaError> {
    let mcs = graph.neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)?;
    let per_mc: Vec<Vec<NodeId>> = mcs
        .iter()
        .map(|&mc| graph.neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out))
        .collect::<Result<_, _>>()?;
    let mut seen = alloc::collections::BTreeSet::new();
    let mut out = Vec::new();
    let longest = per_mc.iter().map(Vec::len).max().unwrap_or(0);
    'outer: for round in 0..longest {
        for rcs in &per_mc {
            if let Some(&rc) = rcs.get(round) {
                let node = graph.node(rc).expect("traversal id");
                let title = node
                    .prop_str("article_title")
                    .unwrap_or_default()
                    .to_string();
                if title.is_empty() || !seen.insert(title.clone()) {
                    continue;
                }
                out.push(RcCandidate {
                    title,
                    first_sentence: node
                        .prop_str("first_sentence")
                        .unwrap_or_default()
                        .to_string(),
                });
                if out.len() == cap {
                    break 'outer;
                }
            }
        }
    }
    Ok(out)
}

/// Tier-2 retrieval: asks the provider which pooled related concept could
/// answer the question (P3) and loads that article whole. `None` when the
/// provider declines, answers off-list twice, or there are no candidates.
pub fn fallback_rc(
    question: &str,
    slide: NodeId,
    graph: &KnowledgeGraph,
    source: &dyn ArticleSource,
    chat: &dyn ChatProvider,
    config: &QaConfig,
) -> Result<Option<(String, String)>, QaError> {
    let candidates = pooled_rc_candidates(graph, slide, config.rc_candidate_cap)?;
    if candidates.is_empty() {
        log::warn!("fallback: slide {slide} has no related concepts to consult");
        return Ok(None);
    }
    let request = render_p3(
        &PromptP3Context {
            question: question.to_string(),
            rc_candidates: candidates.clone(),
        },
        &config.chat_params,
    );
    let mut chosen = None;
    for attempt in 0..2 {
        let reply = chat.complete(&request)?;
        let reply = reply.trim();
        if reply == NONE_SENTINEL {
            return Ok(None);
        }
        if let Some(c) = candidates.iter().find(|c| c.title == reply) {
            chosen = Some(c.title.clone());
            break;
        }
        log::warn!(
            "fallback: reply {reply:?} is not a listed candidate (attempt {})",
            attempt + 1
        );
    }
    let Some(title) = chosen else {
        log::warn!("fallback: no valid candidate selected; treating as {NONE_SENTINEL}");
        return Ok(None);
    };
    match source.fetch(&title) {
        Ok(article) => Ok(Some((article.title, article.text))),
        Err(SourceError::NotFound { .. }) => {
            log::warn!("fallback: selected article {title:?} failed to fetch");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// First whitespace-normalized occurrence of the answer in the source text,
/// as character offsets. Only called for answers that passed grounding, so a
/// miss is an internal error.
pub fn locate_citation(answer_text: &str, source_text: &str) -> Result<(usize, usize), QaError> {
    normalized_find(source_text, answer_text).ok_or(QaError::CitationNotFound)
}

/// Everything [`answer_question`] needs, bundled to keep the call site flat.
pub struct QaDeps<'a> {
    pub graph: &'a KnowledgeGraph,
    pub source: &'a dyn ArticleSource,
    pub chat: &'a dyn ChatProvider,
    pub embedder: &'a dyn EmbeddingProvider,
    pub config: &'a QaConfig,
}

/// Full answering pipeline for one question on one slide.
///
/// Tier 1: slide-scoped paragraph retrieval → extraction → citations.
/// Tier 2 (only when tier 1 produced nothing): related-concept selection →
/// whole-article windows → extraction → citations. `no_answer` only after
/// both tiers fail.
pub fn answer_question(
    question_id: &str,
    question: &str,
    slide: NodeId,
    deps: &QaDeps<'_>,
) -> Result<AnswerSet, QaError> {
    let contexts = retrieve_contexts(question, slide, deps.graph, deps.embedder, deps.config)?;

    if !contexts.is_empty() {
        let texts: Vec<String> = contexts.iter().map(|c| c.paragraph_text.clone()).collect();
        match extract_answers(question, &texts, deps.chat, &deps.config.chat_params)? {
            ExtractOutcome::Answers(grounded) => {
                let mut answers = Vec::with_capacity(grounded.len());
                for g in grounded {
                    let ctx = &contexts[g.context_index];
                    let (start, end) = locate_citation(&g.answer_text, &ctx.paragraph_text)?;
                    answers.push(AnswerWithCitation {
                        answer_text: g.answer_text,
                        source_article_title: ctx.mc_title.clone(),
                        source: SourceRef::Paragraph(ctx.paragraph_index),
                        span_start: start,
                        span_end: end,
                        tier: AnswerTier::McParagraph,
                    });
                }
                return Ok(AnswerSet::answered(question_id.to_string(), answers));
            }
            ExtractOutcome::NoAnswer => {
                log::info!("tier 1 found no answer for {question:?}; consulting related concepts");
            }
        }
    }

    let Some((rc_title, article_text)) = fallback_rc(
        question,
        slide,
        deps.graph,
        deps.source,
        deps.chat,
        deps.config,
    )?
    else {
        return Ok(AnswerSet::no_answer(question_id.to_string()));
    };

    let windows = chunk_paragraphs(&article_text);
    if windows.is_empty() {
        return Ok(AnswerSet::no_answer(question_id.to_string()));
    }
    match extract_answers(question, &windows, deps.chat, &deps.config.chat_params)? {
        ExtractOutcome::Answers(grounded) => {
            let mut answers = Vec::with_capacity(grounded.len());
            for g in grounded {
                // Windows are substrings of the article modulo whitespace,
                // so locating against the whole article is sound.
                let (start, end) = locate_citation(&g.answer_text, &article_text)?;
                answers.push(AnswerWithCitation {
                    answer_text: g.answer_text,
                    source_article_title: rc_title.clone(),
                    source: SourceRef::WholeArticle,
                    span_start: start,
                    span_end: end,
                    tier: AnswerTier::RcArticle,
                });
            }
            Ok(AnswerSet::answered(question_id.to_string(), answers))
        }
        ExtractOutcome::NoAnswer => Ok(AnswerSet::no_answer(question_id.to_string())),
    }
}
