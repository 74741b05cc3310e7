//! Provider-agnostic chat completion plus the three prompt templates and
//! their response parsers.
//!
//! Template P1 generates study questions for a DNU concept, P2 extracts
//! answers verbatim from retrieved contexts, and P3 picks which related
//! concept could answer a question. Rendering is a pure function of the
//! context — identical contexts render byte-identical requests — and every
//! request has a stable fingerprint over (system text, user text, model), so
//! scripted providers can replay transcripts deterministically.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::text::fnv1a64;

/// Bumped whenever template wording changes, so recorded transcripts and
/// evaluation results can cite the wording they ran against.
pub const TEMPLATE_VERSION: &str = "v1";

/// Exact sentinel a P2 completion uses when no context answers the question.
pub const NO_ANSWER_SENTINEL: &str = "NO_ANSWER";

/// Exact sentinel a P3 completion uses when no candidate fits.
pub const NONE_SENTINEL: &str = "NONE";

/// Rules embedded verbatim in the question-generation template.
pub const QG_RULES: [&str; 5] = [
    "Every question must be about the marked concept.",
    "Use only the slide text and the listed slide concepts as grounding.",
    "Do not repeat questions that are semantically similar.",
    "Each question must be answerable from encyclopedic material.",
    "Each question is a single sentence ending in '?'.",
];

/// One chat completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    /// Defaults to 0.0 for reproducibility.
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_name: String,
}

/// Model parameters shared by every rendered request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            model_name: "default".to_string(),
            temperature: 0.0,
            max_output_tokens: 512,
        }
    }
}

/// Stable fingerprint of a request: FNV-1a 64 over system text, user text,
/// and model name, rendered as 16 hex digits. Timing and sampling parameters
/// are deliberately excluded.
pub fn fingerprint(request: &ChatRequest) -> String {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(request.system_text.as_bytes());
    bytes.push(0x1f);
    bytes.extend_from_slice(request.user_text.as_bytes());
    bytes.push(0x1f);
    bytes.extend_from_slice(request.model_name.as_bytes());
    format!("{:016x}", fnv1a64(&bytes))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("provider rejected request with status {status}: {message}")]
    Request { status: u16, message: String },
    #[error("scripted provider has no response for fingerprint {fingerprint}")]
    ScriptedMiss { fingerprint: String },
    #[error("completion contained no parseable questions")]
    EmptyGeneration,
    #[error("malformed answer: {message}")]
    MalformedAnswer { message: String },
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport {
                retryable: true,
                ..
            }
        )
    }
}

/// Something that can run a chat completion.
pub trait ChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

impl<T: ChatProvider + ?Sized> ChatProvider for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for alloc::boxed::Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

/// Context for the question-generation template (P1).
#[derive(Debug, Clone, PartialEq)]
pub struct PromptP1Context {
    /// Name of the concept the learner marked as not understood.
    pub dnu_concept: String,
    /// Text of the slide the concept sits on.
    pub slide_text: String,
    /// Names of the slide's other main concepts (the DNU concept excluded).
    pub slide_concepts: Vec<String>,
    /// Rules embedded verbatim; [`QG_RULES`] unless a caller overrides.
    pub qg_rules: Vec<String>,
    pub question_count: usize,
}

impl PromptP1Context {
    pub fn new(
        dnu_concept: impl Into<String>,
        slide_text: impl Into<String>,
        slide_concepts: Vec<String>,
        question_count: usize,
    ) -> Self {
        Self {
            dnu_concept: dnu_concept.into(),
            slide_text: slide_text.into(),
            slide_concepts,
            qg_rules: QG_RULES.iter().map(|r| r.to_string()).collect(),
            question_count,
        }
    }
}

/// A retrieved context labeled for citation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledContext {
    pub source_label: String,
    pub text: String,
}

/// Context for the extractive question-answering template (P2).
#[derive(Debug, Clone, PartialEq)]
pub struct PromptP2Context {
    pub question: String,
    pub contexts: Vec<LabeledContext>,
}

/// A related-concept candidate offered to the retrieval template (P3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RcCandidate {
    pub title: String,
    pub first_sentence: String,
}

/// Context for the related-concept retrieval template (P3).
#[derive(Debug, Clone, PartialEq)]
pub struct PromptP3Context {
    pub question: String,
    pub rc_candidates: Vec<RcCandidate>,
}

fn system_text(role_line: &str) -> String {
    format!("You are a tutor for an online course. {role_line} [template {TEMPLATE_VERSION}]")
}

/// Renders the question-generation prompt.
pub fn render_p1(ctx: &PromptP1Context, params: &ChatParams) -> ChatRequest {
    let concepts = if ctx.slide_concepts.is_empty() {
        "(none)".to_string()
    } else {
        ctx.slide_concepts.join(", ")
    };
    let rules: String = ctx
        .qg_rules
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}. {r}\n", i + 1))
        .collect();
    let user_text = format!(
        "A learner marked the concept \"{dnu}\" as NOT UNDERSTOOD.\n\
         \n\
         Slide text:\n\
         {slide}\n\
         \n\
         Other concepts on this slide: {concepts}\n\
         \n\
         Rules:\n\
         {rules}\
         \n\
         Write {count} questions that would help the learner understand \"{dnu}\".\n\
         Output exactly a numbered list, one question per line, in the form \
         \"1. <question>\", with no preamble and no closing remarks.",
        dnu = ctx.dnu_concept,
        slide = ctx.slide_text,
        count = ctx.question_count,
    );
    ChatRequest {
        system_text: system_text(
            "You write study questions that help a learner understand a concept \
             they marked as not understood.",
        ),
        user_text,
        temperature: params.temperature,
        max_output_tokens: params.max_output_tokens,
        model_name: params.model_name.clone(),
    }
}

/// Renders the extractive question-answering prompt.
pub fn render_p2(ctx: &PromptP2Context, params: &ChatParams) -> ChatRequest {
    let mut contexts = String::new();
    for c in &ctx.contexts {
        contexts.push_str(&format!("[{}] {}\n\n", c.source_label, c.text));
    }
    let user_text = format!(
        "Question: {question}\n\
         \n\
         Contexts:\n\
         {contexts}\
         Answer using ONLY sentence spans copied verbatim from the contexts above.\n\
         Write one answer per line, prefixed with the source label in square \
         brackets, e.g. \"[C1] <copied span>\".\n\
         Do not paraphrase, summarize, or add words of your own.\n\
         If no context answers the question, output exactly {sentinel}.",
        question = ctx.question,
        sentinel = NO_ANSWER_SENTINEL,
    );
    ChatRequest {
        system_text: system_text(
            "You answer strictly by extracting spans from the provided sources.",
        ),
        user_text,
        temperature: params.temperature,
        max_output_tokens: params.max_output_tokens,
        model_name: params.model_name.clone(),
    }
}

/// Renders the related-concept retrieval prompt.
pub fn render_p3(ctx: &PromptP3Context, params: &ChatParams) -> ChatRequest {
    let mut candidates = String::new();
    for c in &ctx.rc_candidates {
        candidates.push_str(&format!("- {}: {}\n", c.title, c.first_sentence));
    }
    let user_text = format!(
        "Question: {question}\n\
         \n\
         Candidate related concepts:\n\
         {candidates}\
         \n\
         Reply with exactly one title from the list above, copied verbatim, \
         naming the concept most likely to contain an answer to the question.\n\
         If none of them could contain an answer, reply exactly {sentinel}.",
        question = ctx.question,
        sentinel = NONE_SENTINEL,
    );
    ChatRequest {
        system_text: system_text(
            "You decide which related article could answer a learner's question.",
        ),
        user_text,
        temperature: params.temperature,
        max_output_tokens: params.max_output_tokens,
        model_name: params.model_name.clone(),
    }
}

/// Parses a numbered question list: lines shaped like `N. <question>`,
/// numbering stripped, empties and lines not ending in `?` dropped, capped
/// at `expected_max`. Zero surviving questions is an error the caller may
/// retry once.
pub fn parse_question_list(text: &str, expected_max: usize) -> Result<Vec<String>, GatewayError> {
    let mut questions = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            continue;
        }
        let rest = &line[digits..];
        let rest = match rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            Some(r) => r.trim(),
            None => continue,
        };
        if rest.is_empty() || !rest.ends_with('?') {
            continue;
        }
        questions.push(rest.to_owned());
        if questions.len() == expected_max {
            break;
        }
    }
    if questions.is_empty() {
        return Err(GatewayError::EmptyGeneration);
    }
    Ok(questions)
}

/// One extracted answer bound to the context it was copied from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledAnswer {
    pub source_label: String,
    pub answer_text: String,
}

/// Outcome of parsing a P2 completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedAnswer {
    NoAnswer,
    Answers(Vec<LabeledAnswer>),
}

/// Parses a P2 completion: either the `NO_ANSWER` sentinel as the sole
/// content, or `[label] span` lines. Lines with unknown labels are dropped
/// with a warning; at least one valid line must remain.
pub fn parse_answer(text: &str, known_labels: &[String]) -> Result<ParsedAnswer, GatewayError> {
    if text.trim() == NO_ANSWER_SENTINEL {
        return Ok(ParsedAnswer::NoAnswer);
    }
    let mut answers = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        let Some(rest) = line.strip_prefix('[') else {
            continue;
        };
        let Some(close) = rest.find(']') else {
            continue;
        };
        let label = &rest[..close];
        let span = rest[close + 1..].trim();
        if span.is_empty() {
            continue;
        }
        if !known_labels.iter().any(|l| l == label) {
            log::warn!("parse_answer: dropping line with unknown label {label:?}");
            continue;
        }
        answers.push(LabeledAnswer {
            source_label: label.to_owned(),
            answer_text: span.to_owned(),
        });
    }
    if answers.is_empty() {
        return Err(GatewayError::MalformedAnswer {
            message: "no valid [label] lines and no sentinel".to_string(),
        });
    }
    Ok(ParsedAnswer::Answers(answers))
}

/// Scripted provider for deterministic tests: a map from request
/// fingerprints to canned responses. A request whose fingerprint is not in
/// the script is an error naming the fingerprint, so scripts must be
/// exhaustive.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    script: BTreeMap<String, String>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a canned response for an already-computed fingerprint.
    pub fn insert_fingerprint(
        &mut self,
        fingerprint: impl Into<String>,
        response: impl Into<String>,
    ) {
        self.script.insert(fingerprint.into(), response.into());
    }

    /// Registers a canned response for the given request.
    pub fn script(&mut self, request: &ChatRequest, response: impl Into<String>) {
        self.script.insert(fingerprint(request), response.into());
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let fp = fingerprint(request);
        self.script
            .get(&fp)
            .cloned()
            .ok_or(GatewayError::ScriptedMiss { fingerprint: fp })
    }
}

/// Transport retry schedule: up to `max_retries` retries after the initial
/// attempt, exponential backoff starting at `base_delay_ms` (1 s, 2 s, 4 s
/// by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 1000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn delay_ms(&self, retry: u32) -> u64 {
        self.base_delay_ms << retry
    }
}

/// Wraps a provider with the transport retry schedule. The sleep function is
/// injected so tests can record instead of waiting.
pub struct RetryingProvider<P, S> {
    inner: P,
    policy: RetryPolicy,
    sleep_ms: S,
}

impl<P: ChatProvider, S: Fn(u64)> RetryingProvider<P, S> {
    pub fn new(inner: P, policy: RetryPolicy, sleep_ms: S) -> Self {
        Self {
            inner,
            policy,
            sleep_ms,
        }
    }
}

impl<P: ChatProvider, S: Fn(u64)> ChatProvider for RetryingProvider<P, S> {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let mut retry = 0;
        loop {
            match self.inner.complete(request) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() && retry < self.policy.max_retries => {
                    let delay = self.policy.delay_ms(retry);
                    log::warn!(
                        "completion attempt {} failed ({e}); retrying in {delay} ms",
                        retry + 1
                    );
                    (self.sleep_ms)(delay);
                    retry += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
