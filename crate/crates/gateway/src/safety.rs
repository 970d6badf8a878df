use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::GatewayError;

pub const CRISIS_CATEGORY: &str = "crisis";

const DEFAULT_BLOCKLIST: &str = include_str!("../assets/blocklist.txt");
const DEFAULT_TRIGGERS: &str = include_str!("../assets/triggers.txt");

/// Lowercased word tokens; apostrophes inside words are kept.
pub fn tokens(text: &str) -> Vec<String> {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let re = WORD.get_or_init(|| Regex::new(r"[\p{L}\p{N}]+(?:['’][\p{L}\p{N}]+)*").unwrap());
    re.find_iter(&text.to_lowercase())
        .map(|m| m.as_str().replace('’', "'"))
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Term {
    text: String,
    words: Vec<String>,
}

impl Term {
    fn parse(raw: &str) -> Option<Term> {
        let words = tokens(raw);
        (!words.is_empty()).then(|| Term {
            text: raw.trim().to_lowercase(),
            words,
        })
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Whole-token terms and phrases that block a message outright.
#[derive(Clone, Debug, Default)]
pub struct Blocklist {
    terms: Vec<Term>,
}

impl Blocklist {
    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut terms = Vec::new();
        for (line, raw) in content_lines(text) {
            let term = Term::parse(raw)
                .ok_or_else(|| GatewayError::Config(format!("blocklist line {line}: no word characters")))?;
            terms.push(term);
        }
        Ok(Blocklist { terms })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read blocklist {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_BLOCKLIST).expect("bundled blocklist parses")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Sensitive-topic phrases grouped by category, one `category: term` per line.
#[derive(Clone, Debug, Default)]
pub struct TriggerLexicon {
    entries: Vec<(String, Term)>,
}

impl TriggerLexicon {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut entries = Vec::new();
        for (line, raw) in content_lines(text) {
            let (category, term) = raw.split_once(':').ok_or_else(|| {
                GatewayError::Config(format!("trigger lexicon line {line}: expected `category: term`"))
            })?;
            let category = category.trim().to_lowercase();
            if category.is_empty() {
                return Err(GatewayError::Config(format!("trigger lexicon line {line}: empty category")));
            }
            let term = Term::parse(term)
                .ok_or_else(|| GatewayError::Config(format!("trigger lexicon line {line}: empty term")))?;
            entries.push((category, term));
        }
        Ok(TriggerLexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GatewayError::Config(format!("cannot read trigger lexicon {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TRIGGERS).expect("bundled trigger lexicon parses")
    }

    pub fn categories(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|(c, _)| c.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SafetyAction {
    Pass,
    /// Sorted, deduplicated category tags.
    Warn(Vec<String>),
    Block(String),
}

/// The matched terms stay in process memory; they are never logged or sent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyVerdict {
    pub action: SafetyAction,
    pub matched: Vec<String>,
}

impl SafetyVerdict {
    pub fn is_blocked(&self) -> bool {
        matches!(self.action, SafetyAction::Block(_))
    }

    pub fn tags(&self) -> &[String] {
        match &self.action {
            SafetyAction::Warn(tags) => tags,
            _ => &[],
        }
    }

    pub fn has_crisis(&self) -> bool {
        self.tags().iter().any(|t| t == CRISIS_CATEGORY)
    }
}

/// Blocklist first, then trigger categories; case-insensitive whole-token.
pub fn safety_check(text: &str, blocklist: &Blocklist, triggers: &TriggerLexicon) -> SafetyVerdict {
    let words = tokens(text);
    let blocked: Vec<String> = blocklist
        .terms
        .iter()
        .filter(|t| contains_phrase(&words, &t.words))
        .map(|t| t.text.clone())
        .collect();
    if !blocked.is_empty() {
        return SafetyVerdict {
            action: SafetyAction::Block("blocklist".into()),
            matched: blocked,
        };
    }
    let mut tags = BTreeSet::new();
    let mut matched = Vec::new();
    for (category, term) in &triggers.entries {
        if contains_phrase(&words, &term.words) {
            tags.insert(category.clone());
            matched.push(term.text.clone());
        }
    }
    if tags.is_empty() {
        SafetyVerdict {
            action: SafetyAction::Pass,
            matched,
        }
    } else {
        SafetyVerdict {
            action: SafetyAction::Warn(tags.into_iter().collect()),
            matched,
        }
    }
}
