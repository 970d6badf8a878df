//! Conversation corpus cleaning.
//!
//! Each raw record goes through anonymization, normalization, tokenization,
//! a second anonymization scan over the normalized text, and finally the
//! length/lexicon filter. See [`pipeline::run_pipeline`].

mod anonymize;
mod filter;
mod normalize;
mod pipeline;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use anonymize::{
    anonymize, contains_pii, default_rule_specs, default_rules, AnonymizationReport, PiiClass,
    PiiRule, PiiRuleSpec, Redaction,
};
pub use filter::{filter_record, DropReason, FilterDecision};
pub use normalize::{normalize_text, tokenize};
pub use pipeline::{process_record, run_pipeline, PipelineStats, RecordOutcome};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read lexicon {path}: {source}")]
    Lexicon {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Kaggle,
    Hf,
    Reddit,
    Twitter,
    Apa,
}

/// One exported prompt/response record, before cleaning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: String,
    pub source: Source,
    pub prompt: String,
    pub response: String,
}

/// A cleaned training pair. `prompt`/`response` hold the normalized text and
/// always equal the corresponding token list joined by single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationPair {
    pub id: String,
    pub source: Source,
    #[serde(rename = "prompt")]
    pub prompt_text: String,
    #[serde(rename = "response")]
    pub response_text: String,
    pub prompt_tokens: Vec<String>,
    pub response_tokens: Vec<String>,
}

/// Case-folded set of offensive terms, one per line in the source file.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    terms: HashSet<String>,
}

impl Lexicon {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Lexicon {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let terms = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Lexicon { terms }
    }

    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Lexicon {
            terms: terms.into_iter().map(|t| t.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.terms.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// On-disk pipeline configuration. Missing keys take their defaults;
/// `pii_rules` defaults to [`default_rule_specs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfigFile {
    pub min_words: usize,
    pub max_seq_len: usize,
    pub offensive_lexicon: Option<PathBuf>,
    pub pii_rules: Vec<PiiRuleSpec>,
    pub lowercase: bool,
    pub strip_nontext: bool,
}

impl Default for PipelineConfigFile {
    fn default() -> Self {
        PipelineConfigFile {
            min_words: 10,
            max_seq_len: 512,
            offensive_lexicon: None,
            pii_rules: default_rule_specs(),
            lowercase: true,
            strip_nontext: true,
        }
    }
}

/// Validated pipeline configuration with compiled rules and loaded lexicon.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub min_words: usize,
    pub max_seq_len: usize,
    pub offensive: Lexicon,
    pub pii_rules: Vec<PiiRule>,
    pub lowercase: bool,
    pub strip_nontext: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_words: 10,
            max_seq_len: 512,
            offensive: Lexicon::default(),
            pii_rules: default_rules(),
            lowercase: true,
            strip_nontext: true,
        }
    }
}

impl PipelineConfig {
    /// Relative lexicon paths are resolved against `base_dir`.
    pub fn from_file_config(
        file: &PipelineConfigFile,
        base_dir: Option<&Path>,
    ) -> Result<Self, CorpusError> {
        if file.min_words < 1 {
            return Err(CorpusError::Config("min_words must be >= 1".into()));
        }
        if file.max_seq_len < 1 {
            return Err(CorpusError::Config("max_seq_len must be >= 1".into()));
        }
        if file.pii_rules.is_empty() {
            return Err(CorpusError::Config("pii_rules must not be empty".into()));
        }
        let pii_rules = file
            .pii_rules
            .iter()
            .map(PiiRule::compile)
            .collect::<Result<Vec<_>, _>>()?;
        let offensive = match &file.offensive_lexicon {
            Some(p) => {
                let path = match base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p.clone(),
                };
                Lexicon::load(&path)?
            }
            None => Lexicon::default(),
        };
        Ok(PipelineConfig {
            min_words: file.min_words,
            max_seq_len: file.max_seq_len,
            offensive,
            pii_rules,
            lowercase: file.lowercase,
            strip_nontext: file.strip_nontext,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CorpusError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: PipelineConfigFile = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Config(format!("{}: {e}", path.display())))?;
        Self::from_file_config(&file, path.parent())
    }
}
