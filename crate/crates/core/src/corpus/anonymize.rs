use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::normalize::placeholder_regex;
use super::CorpusError;

/// Category a redaction is reported under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PiiClass {
    Email,
    Phone,
    Url,
    Handle,
    Username,
    NumberId,
}

impl PiiClass {
    pub const ALL: [PiiClass; 6] = [
        PiiClass::Email,
        PiiClass::Phone,
        PiiClass::Url,
        PiiClass::Handle,
        PiiClass::Username,
        PiiClass::NumberId,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PiiClass::Email => "EMAIL",
            PiiClass::Phone => "PHONE",
            PiiClass::Url => "URL",
            PiiClass::Handle => "HANDLE",
            PiiClass::Username => "USERNAME",
            PiiClass::NumberId => "NUMBER_ID",
        }
    }

    pub fn placeholder(self) -> String {
        format!("[REDACTED:{}]", self.label())
    }
}

impl fmt::Display for PiiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PiiClass {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PiiClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| CorpusError::Config(format!("unknown PII class {s:?}")))
    }
}

/// Serialized form of a rule, as it appears in pipeline config files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiRuleSpec {
    pub pattern: String,
    pub class: PiiClass,
}

/// A compiled redaction rule.
#[derive(Debug, Clone)]
pub struct PiiRule {
    pub class: PiiClass,
    pub pattern: Regex,
}

impl PiiRule {
    pub fn compile(spec: &PiiRuleSpec) -> Result<Self, CorpusError> {
        let pattern = Regex::new(&spec.pattern).map_err(|e| {
            CorpusError::Config(format!("invalid {} pattern {:?}: {e}", spec.class, spec.pattern))
        })?;
        Ok(PiiRule {
            class: spec.class,
            pattern,
        })
    }
}

/// Default rules in priority order. Earlier rules win on overlapping spans.
pub fn default_rule_specs() -> Vec<PiiRuleSpec> {
    let rule = |class, pattern: &str| PiiRuleSpec {
        pattern: pattern.to_owned(),
        class,
    };
    vec![
        rule(
            PiiClass::Email,
            r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}",
        ),
        rule(
            PiiClass::Url,
            r#"(?i)(?:https?://|www\.)[^\s<>"]*[^\s<>".,;:!?)\]]"#,
        ),
        // 7+ digits, optionally separated by spaces, dots, dashes or a parenthesized prefix
        rule(PiiClass::Phone, r"\+?\(?\d{1,4}\)?(?:[ .-]?\d){6,}"),
        rule(PiiClass::Handle, r"@[A-Za-z0-9_]{2,}"),
        rule(PiiClass::Username, r"\bu/[A-Za-z0-9_-]{3,}"),
        rule(PiiClass::NumberId, r"\b\d{6,}\b"),
    ]
}

pub fn default_rules() -> Vec<PiiRule> {
    default_rule_specs()
        .iter()
        .map(|s| PiiRule::compile(s).expect("default PII rules compile"))
        .collect()
}

/// One replacement performed by [`anonymize`]; `span_len` counts characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Redaction {
    pub class: PiiClass,
    pub span_len: usize,
}

/// Replaces every rule match with `[REDACTED:<CLASS>]`.
///
/// Rules are applied in priority order; a match overlapping a span already
/// claimed by an earlier rule (or an existing placeholder) is discarded and
/// the search resumes just after its start. Passes repeat until nothing
/// changes, so the result is a fixed point.
pub fn anonymize(text: &str, rules: &[PiiRule]) -> (String, Vec<Redaction>) {
    let (mut out, mut redactions) = anonymize_pass(text, rules);
    let mut changed = !redactions.is_empty();
    while changed {
        let (next, more) = anonymize_pass(&out, rules);
        changed = !more.is_empty();
        out = next;
        redactions.extend(more);
    }
    (out, redactions)
}

fn anonymize_pass(text: &str, rules: &[PiiRule]) -> (String, Vec<Redaction>) {
    // (start, end, class); None marks an existing placeholder
    let mut claimed: Vec<(usize, usize, Option<PiiClass>)> = placeholder_regex()
        .find_iter(text)
        .map(|m| (m.start(), m.end(), None))
        .collect();

    for rule in rules {
        let mut pos = 0;
        while let Some(m) = rule.pattern.find_at(text, pos) {
            let overlaps = claimed
                .iter()
                .any(|&(s, e, _)| m.start() < e && s < m.end());
            if m.start() == m.end() || overlaps {
                match text[m.start()..].chars().next() {
                    Some(c) => pos = m.start() + c.len_utf8(),
                    None => break,
                }
                continue;
            }
            claimed.push((m.start(), m.end(), Some(rule.class)));
            pos = m.end();
        }
    }
    claimed.sort_by_key(|&(s, _, _)| s);

    let mut out = String::with_capacity(text.len());
    let mut redactions = Vec::new();
    let mut cursor = 0;
    for (start, end, class) in claimed {
        let Some(class) = class else { continue };
        out.push_str(&text[cursor..start]);
        out.push_str(&class.placeholder());
        redactions.push(Redaction {
            class,
            span_len: text[start..end].chars().count(),
        });
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    (out, redactions)
}

/// Redaction counts aggregated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationReport {
    pub redactions: BTreeMap<PiiClass, u64>,
    pub records_touched: u64,
}

impl AnonymizationReport {
    pub fn record(&mut self, redactions: &[Redaction]) {
        if redactions.is_empty() {
            return;
        }
        self.records_touched += 1;
        for r in redactions {
            *self.redactions.entry(r.class).or_insert(0) += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.redactions.values().sum()
    }

    pub fn merge(&mut self, other: &AnonymizationReport) {
        self.records_touched += other.records_touched;
        for (class, n) in &other.redactions {
            *self.redactions.entry(*class).or_insert(0) += n;
        }
    }
}

/// True when any rule matches outside existing placeholders.
pub fn contains_pii(text: &str, rules: &[PiiRule]) -> bool {
    !anonymize(text, rules).1.is_empty()
}
