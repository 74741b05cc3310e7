//! Regenerates `fixtures/transcript.json`: the scripted-provider responses
//! for the bundled demo deck, keyed by prompt fingerprint. Rerun after any
//! change to the deck, the corpus, or the prompt templates:
//!
//! ```text
//! cargo run -p edukg-engine --example make_transcript
//! ```

use std::path::PathBuf;

use serde_json::json;

use edukg_core::embed::HashEmbedder;
use edukg_core::gateway::{
    fingerprint, render_p1, render_p2, render_p3, ChatRequest, LabeledContext, PromptP2Context,
    PromptP3Context,
};
use edukg_core::graph::{NodeKind, PropValue, Props};
use edukg_core::index::{chunk_paragraphs, index_material};
use edukg_core::ingest::{build_edukg, parse_slide_deck};
use edukg_core::qa::{pooled_rc_candidates, retrieve_contexts};
use edukg_core::qgen::{p1_context, retrieve_qg_context};
use edukg_core::source::ArticleSource;

use edukg_engine::config::ServiceConfig;
use edukg_engine::corpus::load_corpus;

const APPLICATIONS_QUESTION: &str = "What are some applications of artificial intelligence?";
const APPLICATIONS_ANSWER: &str =
    "AI has applications in web search engines and recommendation systems.";
const TUNING_QUESTION: &str = "What is parameter tuning in Machine Learning?";
const TUNING_ANSWER: &str = "Hyperparameter optimization or tuning is the problem of choosing \
    a set of optimal hyperparameters for a learning algorithm.";

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = ServiceConfig::default();
    let deck = parse_slide_deck(&std::fs::read(fixtures.join("deck.json"))?)
        .map_err(anyhow::Error::new)?;
    let source = load_corpus(&fixtures.join("corpus"))?;
    let build = build_edukg(&deck, &source, &config.ingest_config()).map_err(anyhow::Error::new)?;
    let mut graph = build.graph;
    index_material(&mut graph, build.lm, &source, &HashEmbedder).map_err(anyhow::Error::new)?;
    let slide4 = build.slide_ids[3];
    let params = config.chat_params();

    let mut entries: Vec<(ChatRequest, String)> = Vec::new();

    // P1 for marking "Artificial Intelligence" on slide 4.
    let ai = graph
        .nodes()
        .find(|n| {
            n.kind == NodeKind::MainConcept
                && n.prop_str("article_title") == Some("Artificial intelligence")
        })
        .expect("fixture concept")
        .id;
    let mut scratch = graph.clone();
    let mut props = Props::new();
    props.insert(
        "learner_name".to_string(),
        PropValue::Str("demo".to_string()),
    );
    let learner = scratch
        .add_node(NodeKind::Learner, props)
        .map_err(anyhow::Error::new)?;
    scratch.mark_dnu(learner, ai).map_err(anyhow::Error::new)?;
    let ctx = retrieve_qg_context(&scratch, learner, ai, slide4).map_err(anyhow::Error::new)?;
    entries.push((
        render_p1(&p1_context(&ctx, config.question_count), &params),
        "1. What is the goal of artificial intelligence?\n\
         2. How does artificial intelligence relate to machine learning?\n\
         3. What are some applications of artificial intelligence?\n\
         4. Why is artificial intelligence called a broad field?\n\
         5. What do intelligent agents perceive and act upon?"
            .to_string(),
    ));

    let p2 = |question: &str, texts: &[String]| {
        let contexts: Vec<LabeledContext> = texts
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
                contexts,
            },
            &params,
        )
    };

    // Tier-1 extraction for the applications question.
    let qa = config.qa_config();
    let contexts = retrieve_contexts(APPLICATIONS_QUESTION, slide4, &graph, &HashEmbedder, &qa)
        .map_err(anyhow::Error::new)?;
    let texts: Vec<String> = contexts.iter().map(|c| c.paragraph_text.clone()).collect();
    let evidence = contexts
        .iter()
        .position(|c| c.paragraph_text.contains(APPLICATIONS_ANSWER))
        .expect("evidence paragraph retrieved");
    entries.push((
        p2(APPLICATIONS_QUESTION, &texts),
        format!("[C{}] {APPLICATIONS_ANSWER}", evidence + 1),
    ));

    // The tuning question declines at tier 1 and resolves through P3.
    let contexts = retrieve_contexts(TUNING_QUESTION, slide4, &graph, &HashEmbedder, &qa)
        .map_err(anyhow::Error::new)?;
    if !contexts.is_empty() {
        let texts: Vec<String> = contexts.iter().map(|c| c.paragraph_text.clone()).collect();
        entries.push((p2(TUNING_QUESTION, &texts), "NO_ANSWER".to_string()));
    }
    let candidates =
        pooled_rc_candidates(&graph, slide4, qa.rc_candidate_cap).map_err(anyhow::Error::new)?;
    entries.push((
        render_p3(
            &PromptP3Context {
                question: TUNING_QUESTION.to_string(),
                rc_candidates: candidates,
            },
            &params,
        ),
        "Hyperparameter optimization".to_string(),
    ));
    let article = source
        .fetch("Hyperparameter optimization")
        .map_err(anyhow::Error::new)?;
    let windows = chunk_paragraphs(&article.text);
    entries.push((
        p2(TUNING_QUESTION, &windows),
        format!("[C1] {TUNING_ANSWER}"),
    ));

    let doc = json!({
        "version": 1,
        "entries": entries
            .iter()
            .map(|(request, response)| json!({
                "fingerprint": fingerprint(request),
                "response": response,
            }))
            .collect::<Vec<_>>(),
    });
    let path = fixtures.join("transcript.json");
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes)?;
    println!("wrote {} entries to {}", entries.len(), path.display());
    Ok(())
}
