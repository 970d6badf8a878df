use crate::api::{CRISIS_RESOURCES, FALLBACK_REPLY, SAFE_REFUSAL};
use crate::prompt::PromptTemplate;
use crate::safety::SafetyVerdict;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalReply {
    pub reply: String,
    pub warnings: Vec<String>,
    pub blocked: bool,
}

pub fn refusal() -> String {
    format!("{SAFE_REFUSAL} {CRISIS_RESOURCES}")
}

/// Drops an echoed prompt or system block, leading assistant tags and
/// anything from the next turn tag on, then trims.
pub fn clean_reply(raw: &str, prompt: &str, template: &PromptTemplate) -> String {
    let mut text = raw.strip_prefix(prompt).unwrap_or(raw);
    if let Some(end) = text.find("</system>") {
        text = &text[end + "</system>".len()..];
    }
    text = text.trim_start();
    while let Some(rest) = strip_tag(text, &template.assistant_tag) {
        text = rest.trim_start();
    }
    let mut end = text.len();
    for tag in [&template.assistant_tag, &template.user_tag] {
        if let Some(i) = text.find(&format!("\n{tag}:")) {
            end = end.min(i);
        }
    }
    text[..end].trim().to_owned()
}

fn strip_tag<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let head = text.get(..tag.len() + 1)?;
    (head.eq_ignore_ascii_case(&format!("{tag}:"))).then(|| &text[tag.len() + 1..])
}

/// Cuts to `max_words` words, backing off to the last sentence end inside
/// the window when there is one.
pub fn truncate_words(text: &str, max_words: usize) -> String {
    let spans: Vec<(usize, usize)> = word_spans(text);
    if spans.len() <= max_words {
        return text.to_owned();
    }
    if max_words == 0 {
        return String::new();
    }
    let window = &text[..spans[max_words - 1].1];
    match window.rfind(['.', '!', '?']) {
        Some(i) => window[..=i].to_owned(),
        None => window.to_owned(),
    }
}

fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Outbound block substitutes the refusal; a crisis tag appends resources.
pub fn finalize(cleaned: &str, max_words: usize, verdict: &SafetyVerdict) -> FinalReply {
    if verdict.is_blocked() {
        return FinalReply {
            reply: refusal(),
            warnings: Vec::new(),
            blocked: true,
        };
    }
    let mut reply = truncate_words(cleaned, max_words).trim().to_owned();
    if reply.is_empty() {
        reply = FALLBACK_REPLY.to_owned();
    }
    if verdict.has_crisis() {
        reply = format!("{reply}\n\n{CRISIS_RESOURCES}");
    }
    FinalReply {
        reply,
        warnings: verdict.tags().to_vec(),
        blocked: false,
    }
}
