use serde::{Deserialize, Serialize};

pub const DISCLOSURE: &str = "You are talking with an AI assistant, not a person. It is not a therapist \
and cannot replace professional care.";

pub const SAFE_REFUSAL: &str = "I'm not able to help with that, but you don't have to face this alone. \
If you might be in danger, please reach out to someone who can help right now.";

pub const CRISIS_RESOURCES: &str = "If you are in crisis, call or text 988 (US) or your local emergency \
number, or find a helpline near you at https://findahelpline.com.";

pub const FALLBACK_REPLY: &str = "I'm not able to respond to that right now. Could you try rephrasing?";

pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const MAX_TOKENS_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub role: Role,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRequest {
    pub message: String,
    #[serde(default)]
    pub history: Vec<Turn>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

fn default_max_tokens() -> usize {
    DEFAULT_MAX_TOKENS
}

impl ChatRequest {
    pub fn new(message: impl Into<String>) -> Self {
        ChatRequest {
            message: message.into(),
            history: Vec::new(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Non-empty message, history alternating from a user turn and ending on
    /// an assistant turn, and `1 <= max_tokens <= MAX_TOKENS_LIMIT`.
    pub fn validate(&self) -> Result<(), String> {
        if self.message.trim().is_empty() {
            return Err("message is empty".into());
        }
        if self.max_tokens == 0 || self.max_tokens > MAX_TOKENS_LIMIT {
            return Err(format!("max_tokens must be in 1..={MAX_TOKENS_LIMIT}"));
        }
        for (i, turn) in self.history.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if turn.role != expected {
                return Err(format!("history turn {i} should be {expected:?}"));
            }
        }
        if self.history.len() % 2 == 1 {
            return Err("history must end with an assistant turn".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub reply: String,
    pub latency_ms: u64,
    pub warnings: Vec<String>,
    pub disclosure: String,
    pub blocked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}
