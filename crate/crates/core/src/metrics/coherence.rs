use std::collections::{BTreeSet, HashMap};

use crate::corpus::{normalize_text, tokenize, PipelineConfig};

/// Token → dimension index for term-frequency embeddings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Indices follow the sorted order of the distinct tokens.
    pub fn build<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let sorted: BTreeSet<&str> = tokens.into_iter().collect();
        let index = sorted
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t.to_owned(), i))
            .collect();
        Vocabulary { index }
    }

    pub fn from_map(index: HashMap<String, usize>) -> Self {
        Vocabulary { index }
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Embedding dimension: one past the largest index.
    pub fn dim(&self) -> usize {
        self.index.values().max().map_or(0, |m| m + 1)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// Maps a tokenized sentence to a dense vector.
pub trait SentenceEmbedder {
    fn embed(&self, sentence: &[String]) -> Vec<f64>;
}

/// L2-normalized term frequencies; out-of-vocabulary tokens are ignored.
pub fn embed_tf<S: AsRef<str>>(sentence: &[S], vocab: &Vocabulary) -> Vec<f64> {
    let mut v = vec![0.0; vocab.dim()];
    for tok in sentence {
        if let Some(i) = vocab.get(tok.as_ref()) {
            v[i] += 1.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[derive(Debug, Clone, Default)]
pub struct TfEmbedder {
    pub vocab: Vocabulary,
}

impl TfEmbedder {
    pub fn new(vocab: Vocabulary) -> Self {
        TfEmbedder { vocab }
    }
}

impl SentenceEmbedder for TfEmbedder {
    fn embed(&self, sentence: &[String]) -> Vec<f64> {
        embed_tf(sentence, &self.vocab)
    }
}

/// Cosine similarity; zero when either vector is all-zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text, then
/// normalizes and tokenizes each piece. Empty sentences are dropped.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    let cfg = PipelineConfig::default();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                sentences.push(&text[start..i]);
                start = i + c.len_utf8();
            }
        }
    }
    sentences.push(&text[start..]);
    sentences
        .into_iter()
        .map(|s| tokenize(&normalize_text(s, &cfg)))
        .filter(|toks| !toks.is_empty())
        .collect()
}

/// Mean cosine similarity between consecutive sentence embeddings.
///
/// Returns `None` when the text has fewer than two sentences.
pub fn coherence<F>(text: &str, splitter: F, embedder: &dyn SentenceEmbedder) -> Option<f64>
where
    F: Fn(&str) -> Vec<Vec<String>>,
{
    let sentences = splitter(text);
    if sentences.len() < 2 {
        return None;
    }
    let vectors: Vec<Vec<f64>> = sentences.iter().map(|s| embedder.embed(s)).collect();
    let sum: f64 = vectors.windows(2).map(|w| cosine(&w[0], &w[1])).sum();
    Some(sum / (vectors.len() - 1) as f64)
}
