use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ConversationPair, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DropReason {
    EmptySide,
    TooShort,
    Offensive,
    ParseError,
}

impl DropReason {
    pub const ALL: [DropReason; 4] = [
        DropReason::EmptySide,
        DropReason::TooShort,
        DropReason::Offensive,
        DropReason::ParseError,
    ];
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::EmptySide => "EMPTY_SIDE",
            DropReason::TooShort => "TOO_SHORT",
            DropReason::Offensive => "OFFENSIVE",
            DropReason::ParseError => "PARSE_ERROR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterDecision {
    Keep(ConversationPair),
    Drop(DropReason),
}

/// Applies the quality rules to an already normalized, tokenized and
/// anonymized pair. Checks run in order: empty side, short response,
/// offensive token on either side. Survivors are truncated to
/// `max_seq_len` tokens per side.
pub fn filter_record(mut pair: ConversationPair, cfg: &PipelineConfig) -> FilterDecision {
    if pair.prompt_tokens.is_empty() || pair.response_tokens.is_empty() {
        return FilterDecision::Drop(DropReason::EmptySide);
    }
    if pair.response_tokens.len() < cfg.min_words {
        return FilterDecision::Drop(DropReason::TooShort);
    }
    let offensive = pair
        .prompt_tokens
        .iter()
        .chain(&pair.response_tokens)
        .any(|t| cfg.offensive.contains(t));
    if offensive {
        return FilterDecision::Drop(DropReason::Offensive);
    }

    if pair.prompt_tokens.len() > cfg.max_seq_len {
        pair.prompt_tokens.truncate(cfg.max_seq_len);
        pair.prompt_text = pair.prompt_tokens.join(" ");
    }
    if pair.response_tokens.len() > cfg.max_seq_len {
        pair.response_tokens.truncate(cfg.max_seq_len);
        pair.response_text = pair.response_tokens.join(" ");
    }
    FilterDecision::Keep(pair)
}
