//! Shared fixtures for integration tests: the bundled deck and corpus, a
//! test configuration, and a scripted-provider builder that derives every
//! fingerprint from the same deterministic pipeline the engine executes.

// Each integration test target compiles this module separately and uses a
// different subset of it.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use edukg_core::embed::HashEmbedder;
use edukg_core::gateway::{
    render_p1, render_p2, render_p3, LabeledContext, PromptP2Context, PromptP3Context,
    ScriptedProvider,
};
use edukg_core::graph::{KnowledgeGraph, NodeId, NodeKind, PropValue, Props};
use edukg_core::index::{chunk_paragraphs, index_material};
use edukg_core::ingest::{build_edukg, parse_slide_deck};
use edukg_core::qa::{pooled_rc_candidates, retrieve_contexts};
use edukg_core::qgen::{p1_context, retrieve_qg_context};
use edukg_core::source::{ArticleSource, InMemorySource};

use edukg_engine::config::ServiceConfig;
use edukg_engine::corpus::load_corpus;
use edukg_engine::engine::Engine;

pub const APPLICATIONS_QUESTION: &str = "What are some applications of artificial intelligence?";
pub const APPLICATIONS_ANSWER: &str =
    "AI has applications in web search engines and recommendation systems.";
pub const TUNING_QUESTION: &str = "What is parameter tuning in Machine Learning?";
pub const TUNING_ANSWER: &str = "Hyperparameter optimization or tuning is the problem of \
    choosing a set of optimal hyperparameters for a learning algorithm.";
pub const SCENARIO_SLIDE: usize = 4;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn deck_bytes() -> Vec<u8> {
    std::fs::read(fixtures_dir().join("deck.json")).expect("fixture deck")
}

pub fn fixture_corpus() -> InMemorySource {
    load_corpus(&fixtures_dir().join("corpus")).expect("fixture corpus")
}

pub fn test_config(data_dir: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        ..ServiceConfig::default()
    }
}

/// Everything the scenario tests need: the deterministic build the engine
/// will reproduce, plus a provider scripted for its exact prompts.
pub struct Scenario {
    pub provider: ScriptedProvider,
    pub graph: KnowledgeGraph,
    pub lm: NodeId,
    pub slide4: NodeId,
    pub ai_concept: NodeId,
    pub ml_concept: NodeId,
}

pub fn p1_questions() -> Vec<&'static str> {
    vec![
        "What is the goal of artificial intelligence?",
        "How does artificial intelligence relate to machine learning?",
        APPLICATIONS_QUESTION,
        "Why is artificial intelligence called a broad field?",
        "What do intelligent agents perceive and act upon?",
    ]
}

fn find_concept(graph: &KnowledgeGraph, article_title: &str) -> NodeId {
    graph
        .nodes()
        .find(|n| {
            n.kind == NodeKind::MainConcept && n.prop_str("article_title") == Some(article_title)
        })
        .unwrap_or_else(|| panic!("concept {article_title:?} missing from fixture build"))
        .id
}

/// Builds the fixture graph exactly as the engine will and scripts the
/// provider for the scenario prompts: P1 for the DNU mark, tier-1 P2 for the
/// applications question, and the full tier-2 chain for the tuning question.
pub fn scripted_scenario(config: &ServiceConfig) -> Scenario {
    let deck = parse_slide_deck(&deck_bytes()).expect("fixture deck parses");
    let source = fixture_corpus();
    let build = build_edukg(&deck, &source, &config.ingest_config()).expect("fixture builds");
    let mut graph = build.graph;
    index_material(&mut graph, build.lm, &source, &HashEmbedder).expect("fixture indexes");
    let slide4 = build.slide_ids[SCENARIO_SLIDE - 1];
    let ai_concept = find_concept(&graph, "Artificial intelligence");
    let ml_concept = find_concept(&graph, "Machine learning");

    let mut provider = ScriptedProvider::new();
    let params = config.chat_params();

    // P1: the learner marks "Artificial Intelligence" on slide 4. The
    // learner's identity does not enter the prompt, so a scratch learner
    // reproduces the exact context.
    let mut scratch = graph.clone();
    let mut props = Props::new();
    props.insert(
        "learner_name".to_string(),
        PropValue::Str("scratch".to_string()),
    );
    let learner = scratch.add_node(NodeKind::Learner, props).expect("learner");
    scratch.mark_dnu(learner, ai_concept).expect("mark");
    let ctx = retrieve_qg_context(&scratch, learner, ai_concept, slide4).expect("qg context");
    let p1 = render_p1(&p1_context(&ctx, config.question_count), &params);
    let numbered: String = p1_questions()
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {q}\n", i + 1))
        .collect();
    provider.script(&p1, numbered);

    // Tier-1 P2 for the applications question: copy the evidence sentence
    // from whichever retrieved context holds it.
    let qa = config.qa_config();
    let contexts = retrieve_contexts(APPLICATIONS_QUESTION, slide4, &graph, &HashEmbedder, &qa)
        .expect("retrieval");
    assert!(
        !contexts.is_empty(),
        "fixture defect: applications question retrieved no contexts above the floor"
    );
    let evidence = contexts
        .iter()
        .position(|c| c.paragraph_text.contains(APPLICATIONS_ANSWER))
        .expect("fixture defect: evidence paragraph not retrieved");
    provider.script(
        &p2_request(APPLICATIONS_QUESTION, &paragraph_texts(&contexts), &params),
        format!("[C{}] {APPLICATIONS_ANSWER}", evidence + 1),
    );

    // The tuning question: tier 1 declines, P3 picks the optimization
    // article, tier 2 copies its definition sentence.
    let contexts =
        retrieve_contexts(TUNING_QUESTION, slide4, &graph, &HashEmbedder, &qa).expect("retrieval");
    if !contexts.is_empty() {
        provider.script(
            &p2_request(TUNING_QUESTION, &paragraph_texts(&contexts), &params),
            "NO_ANSWER",
        );
    }
    let candidates = pooled_rc_candidates(&graph, slide4, qa.rc_candidate_cap).expect("rcs");
    assert!(
        candidates
            .iter()
            .any(|c| c.title == "Hyperparameter optimization"),
        "fixture defect: optimization article not among slide-4 related concepts"
    );
    let p3 = render_p3(
        &PromptP3Context {
            question: TUNING_QUESTION.to_string(),
            rc_candidates: candidates,
        },
        &params,
    );
    provider.script(&p3, "Hyperparameter optimization");
    let article = source
        .fetch("Hyperparameter optimization")
        .expect("article");
    let windows = chunk_paragraphs(&article.text);
    provider.script(
        &p2_request(TUNING_QUESTION, &windows, &params),
        format!("[C1] {TUNING_ANSWER}"),
    );

    Scenario {
        provider,
        graph,
        lm: build.lm,
        slide4,
        ai_concept,
        ml_concept,
    }
}

pub fn paragraph_texts(contexts: &[edukg_core::index::ScoredParagraph]) -> Vec<String> {
    contexts.iter().map(|c| c.paragraph_text.clone()).collect()
}

pub fn p2_request(
    question: &str,
    contexts: &[String],
    params: &edukg_core::gateway::ChatParams,
) -> edukg_core::gateway::ChatRequest {
    let labeled: Vec<LabeledContext> = contexts
        .iter()
        .enumerate()
        .map(|(i, text)| LabeledContext {
            source_label: format!("C{}", i + 1),
            text: text.clone(),
        })
        .collect();
    render_p2(
        &PromptP2Context {
            question: question.to_string(),
            contexts: labeled,
        },
        params,
    )
}

/// Engine wired to the fixture corpus, the scripted provider, and the hash
/// embedder, with snapshots under `data_dir`.
pub fn scenario_engine(data_dir: &Path) -> (Arc<Engine>, Scenario) {
    let config = test_config(data_dir);
    let scenario = scripted_scenario(&config);
    let engine = Engine::with_providers(
        config,
        Box::new(fixture_corpus()),
        Box::new(scenario.provider.clone()),
        Box::new(HashEmbedder),
    )
    .expect("engine");
    (engine, scenario)
}
