//! Service configuration: one JSON document holding the listen address,
//! provider selection, pipeline thresholds, and the snapshot data directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen_addr: String,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub article_source: ArticleSourceConfig,
    #[serde(default)]
    pub chat_provider: ChatProviderConfig,
    #[serde(default)]
    pub embedding_provider: EmbeddingProviderConfig,
    #[serde(default = "default_question_count")]
    pub question_count: usize,
    #[serde(default = "default_retrieval_k")]
    pub retrieval_k: usize,
    #[serde(default = "default_similarity_floor")]
    pub similarity_floor: f64,
    /// Defaults per embedding provider: 0.999 for the hash embedder
    /// (which exaggerates lexical overlap), 0.92 for a remote sentence
    /// embedder.
    #[serde(default)]
    pub dedup_threshold: Option<f64>,
    #[serde(default = "default_max_concepts")]
    pub max_concepts: usize,
    #[serde(default = "default_max_rcs")]
    pub max_rcs: usize,
    #[serde(default = "default_rc_candidate_cap")]
    pub rc_candidate_cap: usize,
    /// Concurrent article fetches during ingestion prefetch.
    #[serde(default = "default_fetch_fanout")]
    pub fetch_fanout: usize,
    /// Global ceiling on in-flight provider requests.
    #[serde(default = "default_request_ceiling")]
    pub request_ceiling: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    /// Per-attempt provider timeout, seconds.
    #[serde(default = "default_request_timeout")]
    pub request_timeout_secs: u64,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}
fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_question_count() -> usize {
    5
}
fn default_retrieval_k() -> usize {
    5
}
fn default_similarity_floor() -> f64 {
    0.15
}
fn default_max_concepts() -> usize {
    10
}
fn default_max_rcs() -> usize {
    100
}
fn default_rc_candidate_cap() -> usize {
    50
}
fn default_fetch_fanout() -> usize {
    4
}
fn default_request_ceiling() -> usize {
    8
}
fn default_max_output_tokens() -> u32 {
    512
}
fn default_request_timeout() -> u64 {
    30
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArticleSourceConfig {
    /// Local corpus directory of article documents plus a search index.
    Fixture { corpus_dir: PathBuf },
    /// Live wiki REST endpoints.
    Wiki { base_url: String },
}

impl Default for ArticleSourceConfig {
    fn default() -> Self {
        ArticleSourceConfig::Fixture {
            corpus_dir: PathBuf::from("fixtures/corpus"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChatProviderConfig {
    /// Replays a transcript of fingerprint → response records.
    Scripted { transcript: PathBuf },
    /// Remote chat-completions endpoint; credentials come from LLM_API_KEY.
    Remote { base_url: String, model: String },
}

impl Default for ChatProviderConfig {
    fn default() -> Self {
        ChatProviderConfig::Scripted {
            transcript: PathBuf::from("fixtures/transcript.json"),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingProviderConfig {
    /// Deterministic token-hash embedder (256 dimensions, no weights).
    #[default]
    Hash,
    /// Remote embeddings endpoint; credentials come from LLM_API_KEY.
    Remote {
        base_url: String,
        model: String,
        dimension: usize,
    },
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: ServiceConfig = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.similarity_floor) {
            bail!("similarity_floor must be in [0, 1]");
        }
        let dedup = self.resolved_dedup_threshold();
        if !(0.0 < dedup && dedup <= 1.0) {
            bail!("dedup_threshold must be in (0, 1]");
        }
        if self.question_count == 0 || self.retrieval_k == 0 {
            bail!("question_count and retrieval_k must be at least 1");
        }
        if self.max_concepts == 0 {
            bail!("max_concepts must be at least 1");
        }
        if self.fetch_fanout == 0 || self.request_ceiling == 0 {
            bail!("fetch_fanout and request_ceiling must be at least 1");
        }
        if self.temperature < 0.0 {
            bail!("temperature must be non-negative");
        }
        Ok(())
    }

    /// Creates the data directory and verifies it is writable.
    pub fn ensure_data_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.data_dir)
            .with_context(|| format!("creating data dir {}", self.data_dir.display()))?;
        let probe = self.data_dir.join(".writable");
        fs::write(&probe, b"ok")
            .with_context(|| format!("data dir {} not writable", self.data_dir.display()))?;
        fs::remove_file(&probe).ok();
        Ok(())
    }

    pub fn chat_params(&self) -> edukg_core::gateway::ChatParams {
        let model_name = match &self.chat_provider {
            ChatProviderConfig::Remote { model, .. } => model.clone(),
            ChatProviderConfig::Scripted { .. } => "scripted".to_string(),
        };
        edukg_core::gateway::ChatParams {
            model_name,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    pub fn ingest_config(&self) -> edukg_core::ingest::IngestConfig {
        edukg_core::ingest::IngestConfig {
            max_concepts: self.max_concepts,
            max_rcs: self.max_rcs,
        }
    }

    /// The configured threshold, or the provider-appropriate default.
    pub fn resolved_dedup_threshold(&self) -> f64 {
        self.dedup_threshold
            .unwrap_or(match &self.embedding_provider {
                EmbeddingProviderConfig::Hash => 0.999,
                EmbeddingProviderConfig::Remote { .. } => 0.92,
            })
    }

    pub fn qg_config(&self) -> edukg_core::qgen::QgConfig {
        edukg_core::qgen::QgConfig {
            question_count: self.question_count,
            dedup_threshold: self.resolved_dedup_threshold(),
            chat_params: self.chat_params(),
        }
    }

    pub fn qa_config(&self) -> edukg_core::qa::QaConfig {
        edukg_core::qa::QaConfig {
            retrieval_k: self.retrieval_k,
            similarity_floor: self.similarity_floor,
            rc_candidate_cap: self.rc_candidate_cap,
            chat_params: self.chat_params(),
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}
