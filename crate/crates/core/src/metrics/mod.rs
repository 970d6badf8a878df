//! Generation-quality metrics over whitespace tokens.
//!
//! All n-gram metrics are generic over the token type so the same code scores
//! `String`, `&str` or integer token ids.

mod bleu;
mod coherence;
mod distinct;
mod ngram;
mod perplexity;
mod report;
mod rouge;

use thiserror::Error;

pub use bleu::{bleu, BleuConfig, Smoothing};
pub use coherence::{
    coherence, cosine, embed_tf, split_sentences, SentenceEmbedder, TfEmbedder, Vocabulary,
};
pub use distinct::{distinct_n, distinct_n_with_mode, DistinctMode};
pub use ngram::{ngram_counts, NGramCounts};
pub use perplexity::perplexity;
pub use report::{evaluate_corpus, EvalConfig, EvalPair, MetricReport};
pub use rouge::rouge_n;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no references given")]
    NoReferences,
    #[error("every reference is shorter than the n-gram order")]
    ReferencesTooShort,
    #[error("no n-grams to count")]
    NoNGrams,
    #[error("empty input")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("negative or non-finite log-likelihood")]
    InvalidLikelihood,
}
