//! Slide-deck ingestion: parse a deck document, extract main concepts per
//! slide, tag them with articles, expand related concepts from article
//! links, and assemble the knowledge graph.
//!
//! Building is deterministic: identical deck bytes against an identical
//! article universe produce identical snapshot bytes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Deserialize;
use thiserror::Error;

use crate::graph::{EdgeKind, GraphError, KnowledgeGraph, NodeId, NodeKind, PropValue, Props};
use crate::keyphrase::extract_main_concepts;
use crate::source::{ArticleRef, ArticleSource, SourceError};
use crate::text::{first_sentence, normalize_ws};

/// A parsed slide deck (deck-v1 document).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlideDeck {
    pub title: String,
    pub slides: Vec<DeckSlide>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeckSlide {
    /// 1-based position in the deck.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("{message}")]
    Validation { message: String },
    #[error(transparent)]
    Source(#[from] SourceError),
    /// Source failure with build position, so a failed ingest reports how
    /// far it got.
    #[error("article source failed at slide {slide}, concept {concept:?} ({built_slides} slides, {built_mcs} concepts built): {source}")]
    SourceAt {
        slide: usize,
        concept: String,
        built_slides: usize,
        built_mcs: usize,
        source: SourceError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Ingestion tunables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    /// Main concepts extracted per slide.
    pub max_concepts: usize,
    /// Related concepts expanded per main concept.
    pub max_rcs: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            max_concepts: 10,
            max_rcs: 100,
        }
    }
}

/// Parses and validates a deck-v1 document: UTF-8 JSON
/// `{title, slides: [{index, text}]}` with indices contiguous from 1 and
/// every slide text non-empty after whitespace normalization.
pub fn parse_slide_deck(bytes: &[u8]) -> Result<SlideDeck, IngestError> {
    #[derive(Deserialize)]
    struct SlideDoc {
        index: usize,
        text: String,
    }
    #[derive(Deserialize)]
    struct DeckDoc {
        title: String,
        slides: Vec<SlideDoc>,
    }

    let doc: DeckDoc = serde_json::from_slice(bytes).map_err(|e| IngestError::Parse {
        offset: crate::text::line_col_to_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;

    if normalize_ws(&doc.title).is_empty() {
        return Err(IngestError::Validation {
            message: "deck title required".to_string(),
        });
    }
    if doc.slides.is_empty() {
        return Err(IngestError::Validation {
            message: "empty slide list".to_string(),
        });
    }
    let mut slides = Vec::with_capacity(doc.slides.len());
    for (i, slide) in doc.slides.iter().enumerate() {
        if slide.index != i + 1 {
            return Err(IngestError::Validation {
                message: format!(
                    "non-contiguous indices: slide at position {} has index {}",
                    i + 1,
                    slide.index
                ),
            });
        }
        if normalize_ws(&slide.text).is_empty() {
            return Err(IngestError::Validation {
                message: format!("slide {} text empty", slide.index),
            });
        }
        slides.push(DeckSlide {
            index: slide.index,
            text: slide.text.clone(),
        });
    }
    Ok(SlideDeck {
        title: doc.title,
        slides,
    })
}

/// Finds the article that discusses a concept phrase: the top search hit
/// whose title matches the phrase case-insensitively, or the highest-ranked
/// hit otherwise. The winning hit is fetched so its link list is
/// authoritative. `None` when the search has no hits.
pub fn tag_wikipedia(
    concept: &str,
    source: &dyn ArticleSource,
) -> Result<Option<ArticleRef>, IngestError> {
    let hits = source.search(concept)?;
    let Some(best) = hits
        .iter()
        .find(|h| h.title.eq_ignore_ascii_case(concept))
        .or_else(|| hits.first())
    else {
        return Ok(None);
    };
    match source.fetch(&best.title) {
        Ok(article) => Ok(Some(ArticleRef::new(
            article.title.clone(),
            best.article_id.clone(),
            first_sentence(&article.text),
            article.link_titles,
        ))),
        Err(SourceError::NotFound { .. }) => {
            log::warn!(
                "tag: search hit {:?} failed to fetch; using search result",
                best.title
            );
            Ok(Some(best.clone()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Expands a tagged main concept into related-concept articles: the first
/// `max_rcs` distinct fetchable links, in link order, skipping titles in
/// `exclude_titles` (case-insensitive) and links that fail to fetch (logged,
/// partial success).
pub fn expand_related_concepts(
    mc: &ArticleRef,
    source: &dyn ArticleSource,
    max_rcs: usize,
    exclude_titles: &[String],
) -> Vec<ArticleRef> {
    let excluded: BTreeSet<String> = exclude_titles.iter().map(|t| t.to_lowercase()).collect();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for link in &mc.link_titles {
        if out.len() == max_rcs {
            break;
        }
        let key = link.to_lowercase();
        if excluded.contains(&key) || !seen.insert(key) {
            continue;
        }
        match source.fetch(link) {
            Ok(article) => {
                if excluded.contains(&article.title.to_lowercase()) {
                    continue;
                }
                out.push(ArticleRef::new(
                    article.title.clone(),
                    article.title.to_lowercase().replace(' ', "_"),
                    first_sentence(&article.text),
                    article.link_titles,
                ));
            }
            Err(e) => {
                log::warn!("expand: link {link:?} skipped: {e}");
            }
        }
    }
    out
}

/// Result of building a knowledge graph from a deck.
#[derive(Debug)]
pub struct EdukgBuild {
    pub graph: KnowledgeGraph,
    pub lm: NodeId,
    pub slide_ids: Vec<NodeId>,
    pub mc_count: usize,
    pub rc_count: usize,
    /// Concept phrases that found no article (left untagged).
    pub untagged: Vec<String>,
}

/// Builds the knowledge graph for one learning material: LM → slides →
/// main concepts → related concepts. Concepts tagged with the same article
/// collapse into a single node with one CONSISTS_OF edge per slide.
pub fn build_edukg(
    deck: &SlideDeck,
    source: &dyn ArticleSource,
    config: &IngestConfig,
) -> Result<EdukgBuild, IngestError> {
    let mut graph = KnowledgeGraph::new();
    let mut props = Props::new();
    props.insert("title".to_string(), PropValue::Str(deck.title.clone()));
    let lm = graph.add_node(NodeKind::LearningMaterial, props)?;

    // Canonical key (article title, or phrase when untagged) → MC node.
    let mut mc_nodes: BTreeMap<String, NodeId> = BTreeMap::new();
    // MC node → its article reference, for RC expansion.
    let mut mc_articles: BTreeMap<NodeId, ArticleRef> = BTreeMap::new();
    // Slide node → titles of its concepts, for the per-slide RC exclusion.
    let mut slide_mc_titles: BTreeMap<NodeId, Vec<String>> = BTreeMap::new();
    let mut slide_ids = Vec::new();
    let mut untagged = Vec::new();

    for slide in &deck.slides {
        let mut sprops = Props::new();
        sprops.insert("slide_text".to_string(), PropValue::Str(slide.text.clone()));
        sprops.insert(
            "slide_index".to_string(),
            PropValue::Int(slide.index as i64),
        );
        let slide_id = graph.add_node(NodeKind::Slide, sprops)?;
        graph.add_edge(lm, EdgeKind::Contains, slide_id)?;
        slide_ids.push(slide_id);

        let mut titles_here = Vec::new();
        for phrase in extract_main_concepts(&slide.text, config.max_concepts) {
            let tag = tag_wikipedia(&phrase.text, source).map_err(|e| match e {
                IngestError::Source(source) => IngestError::SourceAt {
                    slide: slide.index,
                    concept: phrase.text.clone(),
                    built_slides: slide_ids.len().saturating_sub(1),
                    built_mcs: mc_nodes.len(),
                    source,
                },
                other => other,
            })?;
            let canonical = match &tag {
                Some(article) => article.title.to_lowercase(),
                None => phrase.text.to_lowercase(),
            };
            let mc_id = match mc_nodes.get(&canonical) {
                Some(&id) => id,
                None => {
                    let mut mprops = Props::new();
                    mprops.insert(
                        "concept_name".to_string(),
                        PropValue::Str(phrase.text.clone()),
                    );
                    let article_title = match &tag {
                        Some(article) => article.title.clone(),
                        None => String::new(),
                    };
                    mprops.insert("article_title".to_string(), PropValue::Str(article_title));
                    let id = graph.add_node(NodeKind::MainConcept, mprops)?;
                    mc_nodes.insert(canonical, id);
                    match tag {
                        Some(article) => {
                            mc_articles.insert(id, article);
                        }
                        None => {
                            log::info!("build: concept {:?} has no article tag", phrase.text);
                            untagged.push(phrase.text.clone());
                        }
                    }
                    id
                }
            };
            graph.add_edge(slide_id, EdgeKind::ConsistsOf, mc_id)?;
            let node = graph.node(mc_id).expect("just inserted");
            let title = node.prop_str("article_title").unwrap_or_default();
            titles_here.push(if title.is_empty() {
                node.prop_str("concept_name")
                    .unwrap_or_default()
                    .to_string()
            } else {
                title.to_string()
            });
        }
        slide_mc_titles.insert(slide_id, titles_here);
    }

    // Related concepts, one expansion per tagged MC, excluding the titles of
    // every concept that shares a slide with it.
    let mut rc_nodes: BTreeMap<String, NodeId> = BTreeMap::new();
    let mc_ids: Vec<NodeId> = mc_articles.keys().copied().collect();
    for mc_id in mc_ids {
        let article = &mc_articles[&mc_id];
        let mut exclude: Vec<String> = Vec::new();
        for slide_id in
            graph.neighbor_ids(mc_id, EdgeKind::ConsistsOf, crate::graph::Direction::In)?
        {
            if let Some(titles) = slide_mc_titles.get(&slide_id) {
                exclude.extend(titles.iter().cloned());
            }
        }
        for rc in expand_related_concepts(article, source, config.max_rcs, &exclude) {
            let key = rc.title.to_lowercase();
            let rc_id = match rc_nodes.get(&key) {
                Some(&id) => id,
                None => {
                    let mut rprops = Props::new();
                    rprops.insert(
                        "article_title".to_string(),
                        PropValue::Str(rc.title.clone()),
                    );
                    rprops.insert(
                        "first_sentence".to_string(),
                        PropValue::Str(rc.summary_text.clone()),
                    );
                    let id = graph.add_node(NodeKind::RelatedConcept, rprops)?;
                    rc_nodes.insert(key, id);
                    id
                }
            };
            graph.add_edge(mc_id, EdgeKind::RelatedTo, rc_id)?;
        }
    }

    Ok(EdukgBuild {
        graph,
        lm,
        slide_ids,
        mc_count: mc_nodes.len(),
        rc_count: rc_nodes.len(),
        untagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Direction;
    use crate::source::InMemorySource;
    use alloc::vec;

    fn deck_json(title: &str, texts: &[(usize, &str)]) -> Vec<u8> {
        let slides: Vec<String> = texts
            .iter()
            .map(|(i, t)| {
                format!(
                    r#"{{"index":{i},"text":{}}}"#,
                    serde_json::to_string(t).unwrap()
                )
            })
            .collect();
        format!(
            r#"{{"title":{},"slides":[{}]}}"#,
            serde_json::to_string(title).unwrap(),
            slides.join(",")
        )
        .into_bytes()
    }

    #[test]
    fn parse_ten_slide_deck() {
        let texts: Vec<(usize, String)> = (1..=10)
            .map(|i| (i, format!("Slide {i} covers testable material.")))
            .collect();
        let refs: Vec<(usize, &str)> = texts.iter().map(|(i, t)| (*i, t.as_str())).collect();
        let deck = parse_slide_deck(&deck_json("Introduction to Machine Learning", &refs)).unwrap();
        assert_eq!(deck.title, "Introduction to Machine Learning");
        assert_eq!(deck.slides.len(), 10);
        assert_eq!(deck.slides[3].index, 4);
    }

    #[test]
    fn parse_rejects_non_contiguous_indices() {
        let err =
            parse_slide_deck(&deck_json("T", &[(1, "one text"), (3, "three text")])).unwrap_err();
        match err {
            IngestError::Validation { message } => {
                assert!(message.contains("non-contiguous"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_single_slide_deck() {
        let deck = parse_slide_deck(&deck_json("T", &[(1, "only slide")])).unwrap();
        assert_eq!(deck.slides.len(), 1);
    }

    #[test]
    fn parse_rejects_empty_list_and_blank_text() {
        let err = parse_slide_deck(br#"{"title":"T","slides":[]}"#).unwrap_err();
        assert_eq!(
            err,
            IngestError::Validation {
                message: "empty slide list".to_string()
            }
        );
        let err = parse_slide_deck(&deck_json("T", &[(1, "   ")])).unwrap_err();
        assert_eq!(
            err,
            IngestError::Validation {
                message: "slide 1 text empty".to_string()
            }
        );
    }

    #[test]
    fn parse_malformed_reports_offset() {
        match parse_slide_deck(b"{\"title\": \"T\", !!").unwrap_err() {
            IngestError::Parse { offset, .. } => assert!(offset > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn corpus() -> InMemorySource {
        let mut s = InMemorySource::new();
        s.add_article(
            "Artificial intelligence",
            "Artificial intelligence is intelligence demonstrated by machines.\n\n\
             AI research studies reasoning, learning, and perception in software agents.",
            vec![
                "Machine learning".to_string(),
                "Intelligent agent".to_string(),
            ],
        );
        s.add_article(
            "Machine learning",
            "Machine learning is the study of algorithms that improve through experience.\n\n\
             It is seen as a part of artificial intelligence and statistics.",
            vec![
                "Artificial intelligence".to_string(),
                "Hyperparameter optimization".to_string(),
                "Statistics".to_string(),
            ],
        );
        s.add_article(
            "Hyperparameter optimization",
            "Hyperparameter optimization chooses a set of optimal hyperparameters \
             for a learning algorithm.",
            vec!["Machine learning".to_string()],
        );
        s.add_article(
            "Statistics",
            "Statistics is the discipline of collecting and analyzing data.",
            vec![],
        );
        s.add_article(
            "Intelligent agent",
            "An intelligent agent perceives its environment and takes actions.",
            vec!["Artificial intelligence".to_string()],
        );
        s
    }

    #[test]
    fn tag_prefers_exact_title_match() {
        let s = corpus();
        let tag = tag_wikipedia("artificial intelligence", &s)
            .unwrap()
            .unwrap();
        assert_eq!(tag.title, "Artificial intelligence");
        assert!(tag.link_titles.contains(&"Machine learning".to_string()));
    }

    #[test]
    fn tag_unknown_phrase_is_none() {
        let s = corpus();
        assert_eq!(tag_wikipedia("zzzz-nonexistent", &s).unwrap(), None);
    }

    #[test]
    fn tag_machine_learning_has_links() {
        let s = corpus();
        let tag = tag_wikipedia("machine learning", &s).unwrap().unwrap();
        assert_eq!(tag.title, "Machine learning");
        assert!(!tag.link_titles.is_empty());
    }

    #[test]
    fn expand_follows_links_in_order() {
        let s = corpus();
        let mc = tag_wikipedia("machine learning", &s).unwrap().unwrap();
        let rcs = expand_related_concepts(&mc, &s, 100, &["Machine learning".to_string()]);
        let titles: Vec<&str> = rcs.iter().map(|r| r.title.as_str()).collect();
        assert_eq!(
            titles,
            vec![
                "Artificial intelligence",
                "Hyperparameter optimization",
                "Statistics"
            ]
        );
    }

    #[test]
    fn expand_zero_links_is_empty() {
        let s = corpus();
        let mc = tag_wikipedia("statistics", &s).unwrap().unwrap();
        assert!(expand_related_concepts(&mc, &s, 100, &[]).is_empty());
    }

    #[test]
    fn expand_caps_and_skips_unfetchable() {
        let mut s = corpus();
        s.add_article(
            "Hub",
            "Hub article linking far and wide across the corpus.",
            (0..500)
                .map(|i| format!("Missing article {i}"))
                .chain(vec![
                    "Statistics".to_string(),
                    "Machine learning".to_string(),
                    "Intelligent agent".to_string(),
                ])
                .collect(),
        );
        let mc = tag_wikipedia("hub", &s).unwrap().unwrap();
        let rcs = expand_related_concepts(&mc, &s, 2, &[]);
        // The 500 missing links are skipped; the first two fetchable links
        // that remain are taken.
        assert_eq!(rcs.len(), 2);
        assert_eq!(rcs[0].title, "Statistics");
        assert_eq!(rcs[1].title, "Machine learning");
    }

    fn two_slide_deck() -> SlideDeck {
        SlideDeck {
            title: "Introduction to Machine Learning".to_string(),
            slides: vec![
                DeckSlide {
                    index: 1,
                    text: "Machine learning is the study of algorithms. The essence of \
                           machine learning is generalization from data."
                        .to_string(),
                },
                DeckSlide {
                    index: 2,
                    text: "Artificial intelligence is the parent field of machine learning. \
                           Artificial intelligence is about the automation of reasoning."
                        .to_string(),
                },
            ],
        }
    }

    #[test]
    fn build_creates_expected_shape() {
        let s = corpus();
        let build = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        let g = &build.graph;
        assert_eq!(
            g.nodes()
                .filter(|n| n.kind == NodeKind::LearningMaterial)
                .count(),
            1
        );
        assert_eq!(g.nodes().filter(|n| n.kind == NodeKind::Slide).count(), 2);
        assert_eq!(build.slide_ids.len(), 2);

        // Every MC is reachable from the LM through a slide.
        for mc in g.nodes().filter(|n| n.kind == NodeKind::MainConcept) {
            let slides = g
                .neighbor_ids(mc.id, EdgeKind::ConsistsOf, Direction::In)
                .unwrap();
            assert!(!slides.is_empty());
            for slide in slides {
                let lms = g
                    .neighbor_ids(slide, EdgeKind::Contains, Direction::In)
                    .unwrap();
                assert_eq!(lms, vec![build.lm]);
            }
        }
    }

    #[test]
    fn shared_concept_is_one_node_with_two_edges() {
        let s = corpus();
        let build = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        let g = &build.graph;
        let ml = g
            .nodes()
            .find(|n| {
                n.kind == NodeKind::MainConcept
                    && n.prop_str("article_title") == Some("Machine learning")
            })
            .expect("machine learning node");
        let in_edges = g
            .neighbor_ids(ml.id, EdgeKind::ConsistsOf, Direction::In)
            .unwrap();
        assert_eq!(in_edges.len(), 2);
    }

    #[test]
    fn empty_source_builds_untagged_graph() {
        let s = InMemorySource::new();
        let build = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        assert!(build.mc_count > 0);
        assert_eq!(build.rc_count, 0);
        assert_eq!(build.untagged.len(), build.mc_count);
    }

    #[test]
    fn source_outage_reports_build_position() {
        struct FlakySource {
            inner: InMemorySource,
            budget: core::cell::Cell<usize>,
        }
        impl ArticleSource for FlakySource {
            fn search(&self, phrase: &str) -> Result<Vec<ArticleRef>, SourceError> {
                if self.budget.get() == 0 {
                    return Err(SourceError::Unavailable {
                        message: "outage".to_string(),
                    });
                }
                self.budget.set(self.budget.get() - 1);
                self.inner.search(phrase)
            }
            fn fetch(&self, title: &str) -> Result<crate::source::FetchedArticle, SourceError> {
                self.inner.fetch(title)
            }
        }

        let flaky = FlakySource {
            inner: corpus(),
            budget: core::cell::Cell::new(1),
        };
        let err = build_edukg(&two_slide_deck(), &flaky, &IngestConfig::default()).unwrap_err();
        match err {
            IngestError::SourceAt {
                slide,
                built_slides,
                ..
            } => {
                assert_eq!(slide, 1);
                assert_eq!(built_slides, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn build_is_deterministic() {
        let s = corpus();
        let a = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        let b = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        assert_eq!(a.graph.snapshot(), b.graph.snapshot());
    }

    #[test]
    fn no_rc_duplicates_mc_title_in_slide_neighborhood() {
        let s = corpus();
        let build = build_edukg(&two_slide_deck(), &s, &IngestConfig::default()).unwrap();
        let g = &build.graph;
        for slide in &build.slide_ids {
            let mcs = g
                .neighbor_ids(*slide, EdgeKind::ConsistsOf, Direction::Out)
                .unwrap();
            let mc_titles: BTreeSet<String> = mcs
                .iter()
                .map(|id| {
                    g.node(*id)
                        .unwrap()
                        .prop_str("article_title")
                        .unwrap()
                        .to_lowercase()
                })
                .collect();
            for mc in mcs {
                for rc in g
                    .neighbor_ids(mc, EdgeKind::RelatedTo, Direction::Out)
                    .unwrap()
                {
                    let rc_title = g
                        .node(rc)
                        .unwrap()
                        .prop_str("article_title")
                        .unwrap()
                        .to_lowercase();
                    assert!(!mc_titles.contains(&rc_title), "{rc_title} duplicated");
                }
            }
        }
    }
}
