//! Engine state: materials, learners, question registry, provider wiring,
//! snapshot persistence, and the pipeline glue the HTTP handlers and CLI
//! subcommands call into.
//!
//! Locking follows the store's single-writer contract: mutations (ingest,
//! DNU marks) briefly hold the materials write lock; generation and
//! answering run on a cloned graph so no lock is held across provider
//! calls.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::Serialize;
use thiserror::Error;

use edukg_core::embed::{EmbeddingProvider, HashEmbedder};
use edukg_core::gateway::{ChatProvider, GatewayError};
use edukg_core::graph::{
    Direction, EdgeKind, GraphError, KnowledgeGraph, NodeId, NodeKind, PropValue, Props,
};
use edukg_core::index::{index_material, IndexError};
use edukg_core::ingest::{build_edukg, parse_slide_deck, IngestError};
use edukg_core::keyphrase::extract_main_concepts;
use edukg_core::qa::{answer_question, AnswerStatus, AnswerTier, QaDeps, QaError, SourceRef};
use edukg_core::qgen::{generate_for_dnu, QgError};
use edukg_core::source::{ArticleSource, SourceError};
use edukg_core::text::fnv1a64;

use crate::config::{
    ArticleSourceConfig, ChatProviderConfig, EmbeddingProviderConfig, ServiceConfig,
};
use crate::corpus::{load_corpus, CachedSource};
use crate::providers::{
    load_transcript, with_retries, RemoteChatProvider, RemoteEmbeddingProvider, RequestCeiling,
    ReqwestPost, API_KEY_ENV,
};
use crate::wiki::{ReqwestGet, WikiRestSource};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Conflict(String),
    #[error("question generation failed: {0}")]
    GenerationFailed(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("article source failure: {0}")]
    SourceUnavailable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl EngineError {
    /// Stable machine-readable code for the wire error envelope.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound(_) => "not_found",
            EngineError::Validation(_) => "validation",
            EngineError::Parse(_) => "parse",
            EngineError::Contract(_) => "contract",
            EngineError::Conflict(_) => "conflict",
            EngineError::GenerationFailed(_) => "generation_failed",
            EngineError::Provider(_) => "provider",
            EngineError::SourceUnavailable(_) => "article_source",
            EngineError::Internal(_) => "internal",
        }
    }

    pub fn http_status(&self) -> u16 {
        match self {
            EngineError::NotFound(_) => 404,
            EngineError::Validation(_) | EngineError::Parse(_) => 400,
            EngineError::Contract(_) => 422,
            EngineError::Conflict(_) => 409,
            EngineError::GenerationFailed(_)
            | EngineError::Provider(_)
            | EngineError::SourceUnavailable(_) => 502,
            EngineError::Internal(_) => 500,
        }
    }
}

impl From<IngestError> for EngineError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Parse { .. } => EngineError::Parse(e.to_string()),
            IngestError::Validation { .. } => EngineError::Validation(e.to_string()),
            IngestError::Source(_) | IngestError::SourceAt { .. } => {
                EngineError::SourceUnavailable(e.to_string())
            }
            IngestError::Graph(g) => EngineError::Internal(g.to_string()),
        }
    }
}

impl From<QgError> for EngineError {
    fn from(e: QgError) -> Self {
        match e {
            QgError::ConceptNotOnSlide { .. } => EngineError::Contract(e.to_string()),
            QgError::GenerationFailed => EngineError::GenerationFailed(e.to_string()),
            QgError::Gateway(g) => gateway_error(g),
            QgError::Graph(GraphError::NotFound { id }) => {
                EngineError::NotFound(format!("node {id} not found"))
            }
            other => EngineError::Internal(other.to_string()),
        }
    }
}

impl From<QaError> for EngineError {
    fn from(e: QaError) -> Self {
        match e {
            QaError::Index(IndexError::NotIndexed { .. }) => EngineError::Contract(e.to_string()),
            QaError::Index(other) => EngineError::Internal(other.to_string()),
            QaError::Gateway(g) => gateway_error(g),
            QaError::Source(s) => EngineError::SourceUnavailable(s.to_string()),
            QaError::Graph(GraphError::NotFound { id }) => {
                EngineError::NotFound(format!("node {id} not found"))
            }
            other => EngineError::Internal(other.to_string()),
        }
    }
}

fn gateway_error(e: GatewayError) -> EngineError {
    match e {
        GatewayError::Request { .. }
        | GatewayError::Transport { .. }
        | GatewayError::ScriptedMiss { .. } => EngineError::Provider(e.to_string()),
        other => EngineError::Provider(other.to_string()),
    }
}

struct Material {
    graph: KnowledgeGraph,
    lm: NodeId,
    title: String,
    slide_count: usize,
    mc_count: usize,
    rc_count: usize,
}

impl Material {
    fn from_graph(graph: KnowledgeGraph) -> Result<Self, EngineError> {
        let lm_node = graph
            .nodes()
            .find(|n| n.kind == NodeKind::LearningMaterial)
            .ok_or_else(|| EngineError::Internal("snapshot holds no learning material".into()))?;
        let lm = lm_node.id;
        let title = lm_node.prop_str("title").unwrap_or_default().to_string();
        let slide_count = graph.nodes().filter(|n| n.kind == NodeKind::Slide).count();
        let mc_count = graph
            .nodes()
            .filter(|n| n.kind == NodeKind::MainConcept)
            .count();
        let rc_count = graph
            .nodes()
            .filter(|n| n.kind == NodeKind::RelatedConcept)
            .count();
        Ok(Material {
            graph,
            lm,
            title,
            slide_count,
            mc_count,
            rc_count,
        })
    }
}

#[derive(Debug, Clone)]
struct QuestionRecord {
    material_id: String,
    slide_id: NodeId,
    text: String,
}

/// Wire envelope for one material.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MaterialSummary {
    pub material_id: String,
    pub title: String,
    pub slide_count: usize,
    pub mc_count: usize,
    pub rc_count: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConceptInfo {
    pub id: String,
    pub name: String,
    pub article_title: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct QuestionInfo {
    pub question_id: String,
    pub text: String,
    pub rank_score: f64,
}

/// Result of a DNU mark: the edge is recorded and a fresh ranked question
/// list generated.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DnuEvent {
    pub learner_id: String,
    pub material_id: String,
    pub slide_index: usize,
    pub concept_id: String,
    pub concept_name: String,
    pub questions: Vec<QuestionInfo>,
}

/// Paragraph index or the whole-article marker, rendered as `3` or `"all"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum WireParagraphRef {
    Index(usize),
    Marker(&'static str),
}

pub const WHOLE_ARTICLE_MARKER: &str = "all";

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AnswerWire {
    pub answer_text: String,
    pub source_article_title: String,
    pub source_paragraph_index: WireParagraphRef,
    pub span_start: usize,
    pub span_end: usize,
    pub tier: &'static str,
    pub citation_url: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AnswerSetWire {
    pub question_id: String,
    pub status: &'static str,
    pub answers: Vec<AnswerWire>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PkgSlideGroup {
    pub slide_index: usize,
    pub concepts: Vec<ConceptInfo>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PkgWire {
    pub learner_id: String,
    pub material_id: String,
    pub slides: Vec<PkgSlideGroup>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SourceDoc {
    pub article_title: String,
    pub paragraph: WireParagraphRef,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SlideDoc {
    pub slide_index: usize,
    pub slide_count: usize,
    pub text: String,
}

/// The running engine. Cheap to share: handlers clone the `Arc`.
pub struct Engine {
    pub config: ServiceConfig,
    source: CachedSource<Box<dyn ArticleSource + Send + Sync>>,
    chat: Box<dyn ChatProvider + Send + Sync>,
    embedder: Box<dyn EmbeddingProvider + Send + Sync>,
    materials: RwLock<BTreeMap<String, Material>>,
    questions: RwLock<BTreeMap<String, QuestionRecord>>,
    question_seq: AtomicU64,
    inflight: Mutex<BTreeSet<(String, String)>>,
}

impl Engine {
    /// Builds providers from configuration and loads any snapshots already
    /// in the data directory.
    pub fn from_config(config: ServiceConfig) -> anyhow::Result<Arc<Self>> {
        config.validate()?;
        config.ensure_data_dir()?;
        let timeout = Duration::from_secs(config.request_timeout_secs);
        let api_key = std::env::var(API_KEY_ENV).ok();
        let ceiling = RequestCeiling::new(config.request_ceiling);

        let inner: Box<dyn ArticleSource + Send + Sync> = match &config.article_source {
            ArticleSourceConfig::Fixture { corpus_dir } => Box::new(load_corpus(corpus_dir)?),
            ArticleSourceConfig::Wiki { base_url } => Box::new(WikiRestSource::new(
                Arc::new(ReqwestGet::new(timeout)?),
                base_url.clone(),
            )),
        };
        let source = CachedSource::new(inner);

        let chat: Box<dyn ChatProvider + Send + Sync> = match &config.chat_provider {
            ChatProviderConfig::Scripted { transcript } => Box::new(load_transcript(transcript)?),
            ChatProviderConfig::Remote { base_url, .. } => {
                Box::new(with_retries(RemoteChatProvider::new(
                    Arc::new(ReqwestPost::new(timeout)?),
                    base_url.clone(),
                    api_key.clone(),
                    ceiling.clone(),
                )))
            }
        };

        let embedder: Box<dyn EmbeddingProvider + Send + Sync> = match &config.embedding_provider {
            EmbeddingProviderConfig::Hash => Box::new(HashEmbedder),
            EmbeddingProviderConfig::Remote {
                base_url,
                model,
                dimension,
            } => Box::new(RemoteEmbeddingProvider::new(
                Arc::new(ReqwestPost::new(timeout)?),
                base_url.clone(),
                model.clone(),
                *dimension,
                api_key,
                ceiling,
            )),
        };

        let engine = Arc::new(Self {
            config,
            source,
            chat,
            embedder,
            materials: RwLock::new(BTreeMap::new()),
            questions: RwLock::new(BTreeMap::new()),
            question_seq: AtomicU64::new(0),
            inflight: Mutex::new(BTreeSet::new()),
        });
        engine.reload_snapshots()?;
        Ok(engine)
    }

    /// Engine with injected providers, for tests.
    pub fn with_providers(
        config: ServiceConfig,
        source: Box<dyn ArticleSource + Send + Sync>,
        chat: Box<dyn ChatProvider + Send + Sync>,
        embedder: Box<dyn EmbeddingProvider + Send + Sync>,
    ) -> anyhow::Result<Arc<Self>> {
        config.validate()?;
        config.ensure_data_dir()?;
        let engine = Arc::new(Self {
            config,
            source: CachedSource::new(source),
            chat,
            embedder,
            materials: RwLock::new(BTreeMap::new()),
            questions: RwLock::new(BTreeMap::new()),
            question_seq: AtomicU64::new(0),
            inflight: Mutex::new(BTreeSet::new()),
        });
        engine.reload_snapshots()?;
        Ok(engine)
    }

    fn snapshot_path(&self, material_id: &str) -> PathBuf {
        self.config.data_dir.join(format!("{material_id}.json"))
    }

    fn reload_snapshots(&self) -> anyhow::Result<()> {
        let mut entries: Vec<_> =
            std::fs::read_dir(&self.config.data_dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        let mut materials = self.materials.write();
        for entry in entries {
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let bytes = std::fs::read(&path)?;
            match KnowledgeGraph::load(&bytes) {
                Ok(graph) => match Material::from_graph(graph) {
                    Ok(material) => {
                        log::info!("loaded material {stem} ({})", material.title);
                        materials.insert(stem.to_string(), material);
                    }
                    Err(e) => log::warn!("skipping snapshot {}: {e}", path.display()),
                },
                Err(e) => log::warn!("skipping snapshot {}: {e}", path.display()),
            }
        }
        Ok(())
    }

    fn persist(&self, material_id: &str, graph: &KnowledgeGraph) -> Result<(), EngineError> {
        std::fs::write(self.snapshot_path(material_id), graph.snapshot())
            .map_err(|e| EngineError::Internal(format!("writing snapshot: {e}")))
    }

    /// Ingests a deck document: parse, build the graph, index paragraphs,
    /// persist. Re-uploading identical bytes returns the existing material.
    pub fn ingest_deck(&self, bytes: &[u8]) -> Result<MaterialSummary, EngineError> {
        let material_id = format!("{:016x}", fnv1a64(bytes));
        if let Some(existing) = self.materials.read().get(&material_id) {
            return Ok(MaterialSummary {
                material_id,
                title: existing.title.clone(),
                slide_count: existing.slide_count,
                mc_count: existing.mc_count,
                rc_count: existing.rc_count,
            });
        }

        let deck = parse_slide_deck(bytes)?;

        // Warm the article cache with bounded fan-out before the
        // deterministic single-threaded build.
        let mut phrases: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        for slide in &deck.slides {
            for phrase in extract_main_concepts(&slide.text, self.config.max_concepts) {
                if seen.insert(phrase.text.to_lowercase()) {
                    phrases.push(phrase.text);
                }
            }
        }
        self.source
            .prefetch_phrases(&phrases, self.config.fetch_fanout);

        let build = build_edukg(&deck, &self.source, &self.config.ingest_config())?;
        let mut graph = build.graph;
        let report = index_material(&mut graph, build.lm, &self.source, &self.embedder)
            .map_err(|e| EngineError::Internal(e.to_string()))?;
        if !report.failures.is_empty() {
            log::warn!(
                "index: {} concepts failed: {:?}",
                report.failures.len(),
                report.failures
            );
        }
        self.persist(&material_id, &graph)?;

        let material = Material::from_graph(graph)?;
        let summary = MaterialSummary {
            material_id: material_id.clone(),
            title: material.title.clone(),
            slide_count: material.slide_count,
            mc_count: material.mc_count,
            rc_count: material.rc_count,
        };
        self.materials.write().insert(material_id, material);
        Ok(summary)
    }

    pub fn material_summaries(&self) -> Vec<MaterialSummary> {
        self.materials
            .read()
            .iter()
            .map(|(id, m)| MaterialSummary {
                material_id: id.clone(),
                title: m.title.clone(),
                slide_count: m.slide_count,
                mc_count: m.mc_count,
                rc_count: m.rc_count,
            })
            .collect()
    }

    fn with_material<T>(
        &self,
        material_id: &str,
        f: impl FnOnce(&Material) -> Result<T, EngineError>,
    ) -> Result<T, EngineError> {
        let materials = self.materials.read();
        let material = materials
            .get(material_id)
            .ok_or_else(|| EngineError::NotFound(format!("material {material_id} not found")))?;
        f(material)
    }

    fn slide_by_index(
        graph: &KnowledgeGraph,
        lm: NodeId,
        index: usize,
    ) -> Result<NodeId, EngineError> {
        graph
            .neighbor_ids(lm, EdgeKind::Contains, Direction::Out)
            .map_err(|e| EngineError::Internal(e.to_string()))?
            .into_iter()
            .find(|id| {
                graph
                    .node(*id)
                    .and_then(|n| n.prop_int("slide_index"))
                    .is_some_and(|i| i == index as i64)
            })
            .ok_or_else(|| EngineError::NotFound(format!("slide {index} not found")))
    }

    fn concept_info(graph: &KnowledgeGraph, id: NodeId) -> ConceptInfo {
        let node = graph.node(id).expect("live id");
        ConceptInfo {
            id: id.to_string(),
            name: node
                .prop_str("concept_name")
                .unwrap_or_default()
                .to_string(),
            article_title: node
                .prop_str("article_title")
                .unwrap_or_default()
                .to_string(),
        }
    }

    /// Slide text by 1-based index (the browsing surface the client renders
    /// concept chips over).
    pub fn slide(&self, material_id: &str, slide_index: usize) -> Result<SlideDoc, EngineError> {
        self.with_material(material_id, |material| {
            let slide = Self::slide_by_index(&material.graph, material.lm, slide_index)?;
            let node = material.graph.node(slide).expect("live id");
            Ok(SlideDoc {
                slide_index,
                slide_count: material.slide_count,
                text: node.prop_str("slide_text").unwrap_or_default().to_string(),
            })
        })
    }

    /// Main concepts of one slide, in extraction-rank order.
    pub fn slide_concepts(
        &self,
        material_id: &str,
        slide_index: usize,
    ) -> Result<Vec<ConceptInfo>, EngineError> {
        self.with_material(material_id, |material| {
            let slide = Self::slide_by_index(&material.graph, material.lm, slide_index)?;
            let mcs = material
                .graph
                .neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)
                .map_err(|e| EngineError::Internal(e.to_string()))?;
            Ok(mcs
                .into_iter()
                .map(|id| Self::concept_info(&material.graph, id))
                .collect())
        })
    }

    fn now_millis() -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    /// Records a DNU mark and runs the generation pipeline. One generation
    /// per (learner, concept) may be in flight at a time.
    pub fn mark_dnu(
        &self,
        learner_id: &str,
        material_id: &str,
        slide_index: usize,
        concept_id: &str,
    ) -> Result<DnuEvent, EngineError> {
        let concept: NodeId = concept_id
            .parse()
            .map_err(|_| EngineError::Validation(format!("bad concept id {concept_id:?}")))?;

        let inflight_key = (learner_id.to_string(), concept_id.to_string());
        {
            let mut inflight = self.inflight.lock().expect("inflight poisoned");
            if !inflight.insert(inflight_key.clone()) {
                return Err(EngineError::Conflict(format!(
                    "generation already in flight for learner {learner_id} and concept {concept_id}"
                )));
            }
        }
        let result = self.mark_dnu_inner(learner_id, material_id, slide_index, concept);
        self.inflight
            .lock()
            .expect("inflight poisoned")
            .remove(&inflight_key);
        result
    }

    fn mark_dnu_inner(
        &self,
        learner_id: &str,
        material_id: &str,
        slide_index: usize,
        concept: NodeId,
    ) -> Result<DnuEvent, EngineError> {
        // Mutation phase: ensure the learner node, validate, mark, persist.
        let (graph_copy, learner, slide, concept_name) = {
            let mut materials = self.materials.write();
            let material = materials.get_mut(material_id).ok_or_else(|| {
                EngineError::NotFound(format!("material {material_id} not found"))
            })?;
            let slide = Self::slide_by_index(&material.graph, material.lm, slide_index)?;
            let node = material
                .graph
                .node(concept)
                .ok_or_else(|| EngineError::NotFound(format!("concept {concept} not found")))?;
            if node.kind != NodeKind::MainConcept {
                return Err(EngineError::Contract(format!(
                    "node {concept} is a {}, not a main concept",
                    node.kind
                )));
            }
            let concept_name = node
                .prop_str("concept_name")
                .unwrap_or_default()
                .to_string();
            let on_slide = material
                .graph
                .neighbor_ids(slide, EdgeKind::ConsistsOf, Direction::Out)
                .map_err(|e| EngineError::Internal(e.to_string()))?
                .contains(&concept);
            if !on_slide {
                return Err(EngineError::Contract(format!(
                    "concept {concept} is not on slide {slide_index}"
                )));
            }

            let learner = Self::ensure_learner(&mut material.graph, learner_id)
                .map_err(|e| EngineError::Internal(e.to_string()))?;
            material
                .graph
                .mark_dnu(learner, concept)
                .map_err(|e| EngineError::Internal(e.to_string()))?;
            self.persist(material_id, &material.graph)?;
            (material.graph.clone(), learner, slide, concept_name)
        };

        // Generation phase on the copy: no locks held across provider calls.
        let id_seed = self
            .question_seq
            .fetch_add(self.config.question_count as u64, Ordering::SeqCst);
        let questions = generate_for_dnu(
            &graph_copy,
            learner,
            concept,
            slide,
            &self.chat,
            &self.embedder,
            &self.config.qg_config(),
            Self::now_millis(),
            id_seed,
        )?;

        let mut registry = self.questions.write();
        let infos = questions
            .iter()
            .map(|q| {
                registry.insert(
                    q.question_id.clone(),
                    QuestionRecord {
                        material_id: material_id.to_string(),
                        slide_id: slide,
                        text: q.text.clone(),
                    },
                );
                QuestionInfo {
                    question_id: q.question_id.clone(),
                    text: q.text.clone(),
                    rank_score: q.rank_score,
                }
            })
            .collect();

        Ok(DnuEvent {
            learner_id: learner_id.to_string(),
            material_id: material_id.to_string(),
            slide_index,
            concept_id: concept.to_string(),
            concept_name,
            questions: infos,
        })
    }

    fn ensure_learner(graph: &mut KnowledgeGraph, learner_id: &str) -> Result<NodeId, GraphError> {
        if let Some(node) = graph
            .nodes()
            .find(|n| n.kind == NodeKind::Learner && n.prop_str("learner_name") == Some(learner_id))
        {
            return Ok(node.id);
        }
        let mut props = Props::new();
        props.insert(
            "learner_name".to_string(),
            PropValue::Str(learner_id.to_string()),
        );
        graph.add_node(NodeKind::Learner, props)
    }

    fn citation_url(
        material_id: &str,
        article_title: &str,
        source: SourceRef,
        span: (usize, usize),
    ) -> String {
        let article = utf8_percent_encode(article_title, NON_ALPHANUMERIC);
        let paragraph = match source {
            SourceRef::Paragraph(i) => i.to_string(),
            SourceRef::WholeArticle => WHOLE_ARTICLE_MARKER.to_string(),
        };
        format!(
            "/materials/{material_id}/sources/{article}/{paragraph}#h={}-{}",
            span.0, span.1
        )
    }

    fn run_answer(
        &self,
        question_id: &str,
        question: &str,
        material_id: &str,
        slide: NodeId,
    ) -> Result<AnswerSetWire, EngineError> {
        let graph_copy = self.with_material(material_id, |material| Ok(material.graph.clone()))?;
        let config = self.config.qa_config();
        let deps = QaDeps {
            graph: &graph_copy,
            source: &self.source,
            chat: &self.chat,
            embedder: &self.embedder,
            config: &config,
        };
        let set = answer_question(question_id, question, slide, &deps)?;
        let answers = set
            .answers
            .iter()
            .map(|a| AnswerWire {
                answer_text: a.answer_text.clone(),
                source_article_title: a.source_article_title.clone(),
                source_paragraph_index: match a.source {
                    SourceRef::Paragraph(i) => WireParagraphRef::Index(i),
                    SourceRef::WholeArticle => WireParagraphRef::Marker(WHOLE_ARTICLE_MARKER),
                },
                span_start: a.span_start,
                span_end: a.span_end,
                tier: match a.tier {
                    AnswerTier::McParagraph => "mc_paragraph",
                    AnswerTier::RcArticle => "rc_article",
                },
                citation_url: Self::citation_url(
                    material_id,
                    &a.source_article_title,
                    a.source,
                    (a.span_start, a.span_end),
                ),
            })
            .collect();
        Ok(AnswerSetWire {
            question_id: question_id.to_string(),
            status: match set.status {
                AnswerStatus::Answered => "answered",
                AnswerStatus::NoAnswer => "no_answer",
            },
            answers,
        })
    }

    /// Answers a previously generated question.
    pub fn answer(&self, question_id: &str) -> Result<AnswerSetWire, EngineError> {
        let record = self
            .questions
            .read()
            .get(question_id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("question {question_id} not found")))?;
        self.run_answer(
            question_id,
            &record.text,
            &record.material_id,
            record.slide_id,
        )
    }

    /// Answers a free-form learner question against one slide.
    pub fn ask(
        &self,
        material_id: &str,
        slide_index: usize,
        question: &str,
    ) -> Result<AnswerSetWire, EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::Validation(
                "question text required".to_string(),
            ));
        }
        let slide = self.with_material(material_id, |material| {
            Self::slide_by_index(&material.graph, material.lm, slide_index)
        })?;
        let id = format!(
            "adhoc{}",
            self.question_seq.fetch_add(1, Ordering::SeqCst) + 1
        );
        self.run_answer(&id, question, material_id, slide)
    }

    /// The learner's PKG for one material, grouped by slide.
    pub fn pkg(&self, learner_id: &str, material_id: &str) -> Result<PkgWire, EngineError> {
        self.with_material(material_id, |material| {
            let graph = &material.graph;
            let learner = graph
                .nodes()
                .find(|n| {
                    n.kind == NodeKind::Learner && n.prop_str("learner_name") == Some(learner_id)
                })
                .map(|n| n.id);
            let mut groups: BTreeMap<usize, Vec<ConceptInfo>> = BTreeMap::new();
            if let Some(learner) = learner {
                let view = graph
                    .pkg_view(learner)
                    .map_err(|e| EngineError::Internal(e.to_string()))?;
                for concept in &view.dnu_concepts {
                    let slide = view.containing_slides[concept];
                    let index = graph
                        .node(slide)
                        .and_then(|n| n.prop_int("slide_index"))
                        .unwrap_or_default() as usize;
                    groups
                        .entry(index)
                        .or_default()
                        .push(Self::concept_info(graph, *concept));
                }
            }
            Ok(PkgWire {
                learner_id: learner_id.to_string(),
                material_id: material_id.to_string(),
                slides: groups
                    .into_iter()
                    .map(|(slide_index, concepts)| PkgSlideGroup {
                        slide_index,
                        concepts,
                    })
                    .collect(),
            })
        })
    }

    /// Source text for a citation: one indexed paragraph, or a whole
    /// related-concept article.
    pub fn source_text(
        &self,
        material_id: &str,
        article_title: &str,
        paragraph: &str,
    ) -> Result<SourceDoc, EngineError> {
        if paragraph == WHOLE_ARTICLE_MARKER {
            // Whole-article citations re-read from the article source; the
            // graph deliberately does not store full article text.
            let known = self.with_material(material_id, |material| {
                Ok(material.graph.nodes().any(|n| {
                    matches!(n.kind, NodeKind::RelatedConcept | NodeKind::MainConcept)
                        && n.prop_str("article_title")
                            .is_some_and(|t| t.eq_ignore_ascii_case(article_title))
                }))
            })?;
            if !known {
                return Err(EngineError::NotFound(format!(
                    "article {article_title:?} is not part of material {material_id}"
                )));
            }
            let article = self.source.fetch(article_title).map_err(|e| match e {
                SourceError::NotFound { .. } => EngineError::NotFound(e.to_string()),
                SourceError::Unavailable { .. } => EngineError::SourceUnavailable(e.to_string()),
            })?;
            return Ok(SourceDoc {
                article_title: article.title,
                paragraph: WireParagraphRef::Marker(WHOLE_ARTICLE_MARKER),
                text: article.text,
            });
        }

        let index: usize = paragraph.parse().map_err(|_| {
            EngineError::Validation(format!(
                "paragraph must be an index or {WHOLE_ARTICLE_MARKER:?}"
            ))
        })?;
        self.with_material(material_id, |material| {
            let graph = &material.graph;
            let mc = graph
                .nodes()
                .find(|n| {
                    n.kind == NodeKind::MainConcept
                        && n.prop_str("article_title")
                            .is_some_and(|t| t.eq_ignore_ascii_case(article_title))
                })
                .ok_or_else(|| {
                    EngineError::NotFound(format!("article {article_title:?} not found"))
                })?;
            let wp = graph
                .neighbors(mc.id, EdgeKind::HasParagraph, Direction::Out)
                .map_err(|e| EngineError::Internal(e.to_string()))?
                .into_iter()
                .find(|n| n.prop_int("paragraph_index") == Some(index as i64))
                .ok_or_else(|| {
                    EngineError::NotFound(format!(
                        "paragraph {index} of {article_title:?} not found"
                    ))
                })?;
            Ok(SourceDoc {
                article_title: mc.prop_str("article_title").unwrap_or_default().to_string(),
                paragraph: WireParagraphRef::Index(index),
                text: wp
                    .prop_str("paragraph_text")
                    .unwrap_or_default()
                    .to_string(),
            })
        })
    }
}
