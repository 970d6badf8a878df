use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::api::{ChatRequest, ChatResponse, DISCLOSURE};
use crate::backend::{Backend, BackendError, GenerateRequest, MockBackend, RemoteBackend};
use crate::config::{BackendKind, GatewayConfig};
use crate::metrics::{ErrorClass, Metrics};
use crate::postprocess::{clean_reply, finalize, refusal};
use crate::prompt::PromptTemplate;
use crate::safety::{safety_check, Blocklist, SafetyAction, SafetyVerdict, TriggerLexicon};
use crate::GatewayError;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ChatError {
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("prompt exceeds the {cap}-character cap")]
    PromptTooLarge { cap: usize },
    #[error(transparent)]
    Upstream(#[from] BackendError),
}

impl ChatError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ChatError::BadRequest(_) => ErrorClass::BadRequest,
            ChatError::PromptTooLarge { .. } => ErrorClass::PromptTooLarge,
            ChatError::Upstream(BackendError::Unavailable { .. }) => ErrorClass::UpstreamUnavailable,
            ChatError::Upstream(BackendError::Protocol(_)) => ErrorClass::UpstreamProtocol,
        }
    }
}

/// Immutable per-process state shared by all requests.
pub struct Gateway {
    pub template: PromptTemplate,
    pub prompt_cap: usize,
    pub blocklist: Blocklist,
    pub triggers: TriggerLexicon,
    pub backend: Arc<dyn Backend>,
    pub metrics: Metrics,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Gateway {
            template: PromptTemplate::default(),
            prompt_cap: GatewayConfig::default().limits.prompt_cap,
            blocklist: Blocklist::builtin(),
            triggers: TriggerLexicon::builtin(),
            backend,
            metrics: Metrics::default(),
        }
    }

    /// Loads lexicons and builds the configured backend. The remote token is
    /// read from the named environment variable here and nowhere else.
    pub fn from_config(cfg: &GatewayConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let blocklist = match &cfg.safety.blocklist_path {
            Some(p) => Blocklist::load(p)?,
            None => Blocklist::builtin(),
        };
        let triggers = match &cfg.safety.trigger_lexicon_path {
            Some(p) => TriggerLexicon::load(p)?,
            None => TriggerLexicon::builtin(),
        };
        let backend: Arc<dyn Backend> = match cfg.backend.kind {
            BackendKind::Mock => Arc::new(MockBackend::new(cfg.backend.mock.as_ref().expect("validated"))),
            BackendKind::Remote => {
                let remote = cfg.backend.remote.as_ref().expect("validated");
                let token = std::env::var(&remote.auth_token_env).ok();
                if token.is_none() {
                    tracing::warn!(var = %remote.auth_token_env, "auth token variable is unset; sending no credentials");
                }
                Arc::new(
                    RemoteBackend::new(remote, token, cfg.limits.max_concurrent_upstream)
                        .map_err(GatewayError::Config)?,
                )
            }
        };
        Ok(Gateway {
            template: cfg.template.clone(),
            prompt_cap: cfg.limits.prompt_cap,
            blocklist,
            triggers,
            backend,
            metrics: Metrics::default(),
        })
    }

    fn check(&self, text: &str) -> SafetyVerdict {
        safety_check(text, &self.blocklist, &self.triggers)
    }

    fn blocked_response(&self, tags: Vec<String>) -> ChatResponse {
        ChatResponse {
            reply: refusal(),
            latency_ms: 0,
            warnings: tags,
            disclosure: DISCLOSURE.into(),
            blocked: true,
        }
    }

    /// validate → inbound check → prompt → backend → outbound check →
    /// postprocess. Nothing here writes the message or reply anywhere.
    pub async fn respond(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate().map_err(ChatError::BadRequest)?;
        let inbound = self.check(&req.message);
        if inbound.is_blocked() {
            return Ok(self.blocked_response(Vec::new()));
        }
        let prompt = self
            .template
            .render(req, self.prompt_cap)
            .ok_or(ChatError::PromptTooLarge { cap: self.prompt_cap })?;
        let raw = self
            .backend
            .generate(GenerateRequest {
                prompt: &prompt.text,
                message: &req.message,
                max_tokens: req.max_tokens,
            })
            .await?;
        let cleaned = clean_reply(&raw, &prompt.text, &self.template);
        let outbound = self.check(&cleaned);
        let merged = if outbound.is_blocked() {
            outbound
        } else {
            let tags: BTreeSet<String> = inbound.tags().iter().chain(outbound.tags()).cloned().collect();
            SafetyVerdict {
                action: if tags.is_empty() {
                    SafetyAction::Pass
                } else {
                    SafetyAction::Warn(tags.into_iter().collect())
                },
                matched: Vec::new(),
            }
        };
        let fin = finalize(&cleaned, req.max_tokens, &merged);
        Ok(ChatResponse {
            reply: fin.reply,
            latency_ms: 0,
            warnings: fin.warnings,
            disclosure: DISCLOSURE.into(),
            blocked: fin.blocked,
        })
    }

    /// `respond` timed end to end and recorded in the metrics.
    pub async fn handle(&self, req: &ChatRequest) -> (Result<ChatResponse, ChatError>, Duration) {
        let start = Instant::now();
        let mut out = self.respond(req).await;
        let elapsed = start.elapsed();
        if let Ok(resp) = &mut out {
            resp.latency_ms = elapsed.as_millis() as u64;
        }
        self.metrics.record(elapsed, out.as_ref().err().map(ChatError::class));
        (out, elapsed)
    }
}
