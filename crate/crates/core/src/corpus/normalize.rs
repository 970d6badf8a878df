use std::sync::OnceLock;

use regex::Regex;

use super::PipelineConfig;

/// Matches the placeholders written by [`super::anonymize`]. They survive
/// normalization verbatim so redactions stay visible and idempotent.
pub(crate) fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[REDACTED:[A-Z_]+\]").expect("placeholder regex"))
}

/// Lowercases, drops everything except letters, digits, whitespace and
/// apostrophes, and collapses whitespace runs into single spaces.
///
/// Redaction placeholders (`[REDACTED:EMAIL]`, ...) are kept as whole tokens.
pub fn normalize_text(raw: &str, cfg: &PipelineConfig) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut last = 0;
    for m in placeholder_regex().find_iter(raw) {
        push_segment(&mut out, &raw[last..m.start()], cfg);
        out.push(' ');
        out.push_str(m.as_str());
        out.push(' ');
        last = m.end();
    }
    push_segment(&mut out, &raw[last..], cfg);
    collapse_whitespace(&out)
}

fn push_segment(out: &mut String, segment: &str, cfg: &PipelineConfig) {
    for ch in segment.chars() {
        // typographic apostrophes are folded into the ASCII one
        let ch = if ch == '\u{2019}' || ch == '\u{2018}' { '\'' } else { ch };
        if cfg.strip_nontext && !(ch.is_alphanumeric() || ch.is_whitespace() || ch == '\'') {
            continue;
        }
        if cfg.lowercase {
            out.extend(ch.to_lowercase());
        } else {
            out.push(ch);
        }
    }
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits normalized text into its maximal non-whitespace runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}
