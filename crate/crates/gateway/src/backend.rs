use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::safety::tokens;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("upstream unavailable after {attempts} attempt(s): {detail}")]
    Unavailable { attempts: u32, detail: String },
    #[error("upstream protocol error: {0}")]
    Protocol(String),
}

/// What the model sees (`prompt`) and the raw user message, which the mock
/// modes key on.
#[derive(Clone, Copy, Debug)]
pub struct GenerateRequest<'a> {
    pub prompt: &'a str,
    pub message: &'a str,
    pub max_tokens: usize,
}

#[async_trait]
pub trait Backend: Send + Sync {
    async fn generate(&self, req: GenerateRequest<'_>) -> Result<String, BackendError>;

    /// Calls received so far, for monitoring and tests.
    fn calls(&self) -> u64;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockMode {
    Echo,
    Canned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CannedEntry {
    pub keywords: Vec<String>,
    pub reply: String,
}

pub const CANNED_FALLBACK: &str = "Thank you for sharing that with me. Could you tell me a little more \
about what's on your mind?";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    pub mode: MockMode,
    #[serde(default)]
    pub canned: Vec<CannedEntry>,
    #[serde(default = "default_fallback")]
    pub fallback: String,
}

fn default_fallback() -> String {
    CANNED_FALLBACK.into()
}

impl MockConfig {
    pub fn echo() -> Self {
        MockConfig {
            mode: MockMode::Echo,
            canned: Vec::new(),
            fallback: default_fallback(),
        }
    }
}

struct Keyword {
    words: Vec<String>,
}

pub struct MockBackend {
    mode: MockMode,
    table: Vec<(Vec<Keyword>, String)>,
    fallback: String,
    calls: AtomicU64,
}

impl MockBackend {
    pub fn new(cfg: &MockConfig) -> Self {
        let table = cfg
            .canned
            .iter()
            .map(|e| {
                let keys = e
                    .keywords
                    .iter()
                    .map(|k| Keyword { words: tokens(k) })
                    .filter(|k| !k.words.is_empty())
                    .collect();
                (keys, e.reply.clone())
            })
            .collect();
        MockBackend {
            mode: cfg.mode.clone(),
            table,
            fallback: cfg.fallback.clone(),
            calls: AtomicU64::new(0),
        }
    }

    /// First entry with a keyword appearing as whole tokens in the message.
    pub fn lookup(&self, message: &str) -> &str {
        let words = tokens(message);
        self.table
            .iter()
            .find(|(keys, _)| {
                keys.iter()
                    .any(|k| words.windows(k.words.len()).any(|w| w == k.words.as_slice()))
            })
            .map(|(_, reply)| reply.as_str())
            .unwrap_or(&self.fallback)
    }
}

#[async_trait]
impl Backend for MockBackend {
    async fn generate(&self, req: GenerateRequest<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(match self.mode {
            MockMode::Echo => format!("MOCK: {}", req.message),
            MockMode::Canned => self.lookup(req.message).to_owned(),
        })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_base_ms: u64,
}

fn default_backoff() -> u64 {
    250
}

#[derive(Serialize)]
struct PredictionInput<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Serialize)]
struct PredictionRequest<'a> {
    model: &'a str,
    input: PredictionInput<'a>,
}

#[derive(Deserialize)]
struct PredictionResponse {
    output: String,
}

pub struct RemoteBackend {
    client: reqwest::Client,
    url: String,
    model: String,
    token: Option<String>,
    max_retries: u32,
    backoff: Duration,
    permits: Semaphore,
    calls: AtomicU64,
    attempts: AtomicU64,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    /// `token` is the already-resolved secret; configuration only names the
    /// variable it comes from.
    pub fn new(cfg: &RemoteConfig, token: Option<String>, max_concurrent: usize) -> Result<Self, String> {
        if cfg.base_url.trim().is_empty() || cfg.model.trim().is_empty() {
            return Err("remote backend needs base_url and model".into());
        }
        if cfg.timeout_ms == 0 {
            return Err("remote timeout_ms must be positive".into());
        }
        if max_concurrent == 0 {
            return Err("max_concurrent_upstream must be positive".into());
        }
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| format!("http client: {e}"))?;
        Ok(RemoteBackend {
            client,
            url: format!("{}/predictions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            token,
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_base_ms),
            permits: Semaphore::new(max_concurrent),
            calls: AtomicU64::new(0),
            attempts: AtomicU64::new(0),
        })
    }

    /// HTTP requests issued, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    async fn attempt(&self, req: &GenerateRequest<'_>) -> Result<String, Attempt> {
        self.attempts.fetch_add(1, Ordering::Relaxed);
        let body = PredictionRequest {
            model: &self.model,
            input: PredictionInput {
                prompt: req.prompt,
                max_tokens: req.max_tokens,
            },
        };
        let mut call = self.client.post(&self.url).json(&body);
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let resp = call.send().await.map_err(|e| {
            let kind = if e.is_timeout() { "timeout" } else { "connection failure" };
            Attempt::Retry(kind.into())
        })?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Attempt::Retry(format!("status {}", status.as_u16())));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::Protocol(format!(
                "unexpected status {}",
                status.as_u16()
            ))));
        }
        let bytes = resp.bytes().await.map_err(|e| {
            let kind = if e.is_timeout() { "timeout" } else { "connection failure" };
            Attempt::Retry(format!("{kind} while reading body"))
        })?;
        serde_json::from_slice::<PredictionResponse>(&bytes)
            .map(|p| p.output)
            .map_err(|_| Attempt::Fatal(BackendError::Protocol("malformed prediction body".into())))
    }
}

#[async_trait]
impl Backend for RemoteBackend {
    async fn generate(&self, req: GenerateRequest<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| BackendError::Unavailable {
                attempts: 0,
                detail: "backend shut down".into(),
            })?;
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(&req).await {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(detail)) => {
                    if attempt > self.max_retries {
                        return Err(BackendError::Unavailable {
                            attempts: attempt,
                            detail,
                        });
                    }
                    tracing::warn!(attempt, %detail, "upstream attempt failed, retrying");
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
            }
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
