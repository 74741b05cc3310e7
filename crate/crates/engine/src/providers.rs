//! Live provider clients: the chat-completions and embeddings wire
//! protocols over a pluggable HTTP transport, the transcript-file loader for
//! the scripted provider, and the global request ceiling.

use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use edukg_core::embed::{EmbedError, Embedding, EmbeddingProvider};
use edukg_core::gateway::{
    ChatProvider, ChatRequest, GatewayError, RetryPolicy, RetryingProvider, ScriptedProvider,
};

pub const API_KEY_ENV: &str = "LLM_API_KEY";

/// Blocking JSON POST. One implementation speaks reqwest; tests replay
/// canned status/body sequences.
pub trait HttpPost: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
    ) -> Result<(u16, String), String>;
}

pub struct ReqwestPost {
    client: reqwest::blocking::Client,
}

impl ReqwestPost {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .context("building http client")?;
        Ok(Self { client })
    }
}

impl HttpPost for ReqwestPost {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
    ) -> Result<(u16, String), String> {
        let mut request = self.client.post(url).json(body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

/// Counting semaphore guarding the provider rate ceiling.
pub struct RequestCeiling {
    permits: Mutex<usize>,
    available: Condvar,
}

impl RequestCeiling {
    pub fn new(limit: usize) -> Arc<Self> {
        Arc::new(Self {
            permits: Mutex::new(limit),
            available: Condvar::new(),
        })
    }

    fn acquire(&self) -> CeilingPermit<'_> {
        let mut permits = self.permits.lock().expect("ceiling poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("ceiling poisoned");
        }
        *permits -= 1;
        CeilingPermit { ceiling: self }
    }
}

struct CeilingPermit<'a> {
    ceiling: &'a RequestCeiling,
}

impl Drop for CeilingPermit<'_> {
    fn drop(&mut self) {
        let mut permits = self.ceiling.permits.lock().expect("ceiling poisoned");
        *permits += 1;
        self.ceiling.available.notify_one();
    }
}

fn classify_status(status: u16, body: &str) -> GatewayError {
    let message = format!("status {status}: {}", truncate(body, 200));
    if status == 429 || status >= 500 {
        GatewayError::Transport {
            message,
            retryable: true,
        }
    } else {
        GatewayError::Request { status, message }
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

/// Chat-completions client: POST `{base}/v1/chat/completions`, response
/// text at `choices[0].message.content`.
pub struct RemoteChatProvider {
    transport: Arc<dyn HttpPost>,
    base_url: String,
    api_key: Option<String>,
    ceiling: Arc<RequestCeiling>,
}

impl RemoteChatProvider {
    pub fn new(
        transport: Arc<dyn HttpPost>,
        base_url: impl Into<String>,
        api_key: Option<String>,
        ceiling: Arc<RequestCeiling>,
    ) -> Self {
        Self {
            transport,
            base_url: base_url.into(),
            api_key,
            ceiling,
        }
    }
}

impl ChatProvider for RemoteChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let _permit = self.ceiling.acquire();
        let url = format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches('/')
        );
        let body = json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        });
        let (status, text) = self
            .transport
            .post_json(&url, self.api_key.as_deref(), &body)
            .map_err(|message| GatewayError::Transport {
                message,
                retryable: true,
            })?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, &text));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| GatewayError::Transport {
            message: format!("invalid response body: {e}"),
            retryable: false,
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Transport {
                message: "response missing choices[0].message.content".to_string(),
                retryable: false,
            })
    }
}

/// Embeddings client: POST `{base}/v1/embeddings`, vectors at
/// `data[i].embedding`.
pub struct RemoteEmbeddingProvider {
    transport: Arc<dyn HttpPost>,
    base_url: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    ceiling: Arc<RequestCeiling>,
}

impl RemoteEmbeddingProvider {
    pub fn new(
        transport: Arc<dyn HttpPost>,
        base_url: impl Into<String>,
        model: impl Into<String>,
        dimension: usize,
        api_key: Option<String>,
        ceiling: Arc<RequestCeiling>,
    ) -> Self {
        Self {
            transport,
            base_url: base_url.into(),
            model: model.into(),
            dimension,
            api_key,
            ceiling,
        }
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let _permit = self.ceiling.acquire();
        let url = format!("{}/v1/embeddings", self.base_url.trim_end_matches('/'));
        let body = json!({ "model": self.model, "input": texts });
        let (status, text) = self
            .transport
            .post_json(&url, self.api_key.as_deref(), &body)
            .map_err(|message| EmbedError::Provider { message })?;
        if !(200..300).contains(&status) {
            return Err(EmbedError::Provider {
                message: format!("status {status}: {}", truncate(&text, 200)),
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| EmbedError::Provider {
            message: format!("invalid body: {e}"),
        })?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| EmbedError::Provider {
                message: "response missing data array".to_string(),
            })?;
        let mut out = Vec::with_capacity(texts.len());
        for (i, item) in data.iter().enumerate() {
            let vector: Vec<f64> = item["embedding"]
                .as_array()
                .ok_or_else(|| EmbedError::Provider {
                    message: format!("data[{i}].embedding missing"),
                })?
                .iter()
                .filter_map(Value::as_f64)
                .collect();
            if vector.len() != self.dimension {
                return Err(EmbedError::DimensionMismatch {
                    left: vector.len(),
                    right: self.dimension,
                });
            }
            out.push(Embedding::new(vector));
        }
        if out.len() != texts.len() {
            return Err(EmbedError::Provider {
                message: format!("asked for {} embeddings, got {}", texts.len(), out.len()),
            });
        }
        Ok(out)
    }
}

/// Wraps a chat provider with the transport retry schedule using real
/// sleeps.
pub fn with_retries<P: ChatProvider>(provider: P) -> RetryingProvider<P, fn(u64)> {
    RetryingProvider::new(provider, RetryPolicy::default(), |ms| {
        std::thread::sleep(Duration::from_millis(ms))
    })
}

/// Transcript file for the scripted provider: a JSON document
/// `{version: 1, entries: [{fingerprint, response}]}`.
pub fn load_transcript(path: &Path) -> Result<ScriptedProvider> {
    #[derive(Deserialize)]
    struct Entry {
        fingerprint: String,
        response: String,
    }
    #[derive(Deserialize)]
    struct Transcript {
        version: u64,
        entries: Vec<Entry>,
    }
    let bytes =
        std::fs::read(path).with_context(|| format!("reading transcript {}", path.display()))?;
    let doc: Transcript = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing transcript {}", path.display()))?;
    anyhow::ensure!(
        doc.version == 1,
        "unsupported transcript version {}",
        doc.version
    );
    let mut provider = ScriptedProvider::new();
    for entry in doc.entries {
        provider.insert_fingerprint(entry.fingerprint, entry.response);
    }
    Ok(provider)
}
