//! Token corpora for the bigram model: word vocabularies, train/validation
//! splits and a synthetic first-order Markov source.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Example, TrainError};
use crate::corpus::ConversationPair;

/// Index 0 is reserved for out-of-vocabulary words.
pub const UNK: &str = "<unk>";

/// Serialized as the plain word list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocab {
    pub words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for WordVocab {
    fn from(words: Vec<String>) -> Self {
        Self::from_words(words)
    }
}

impl From<WordVocab> for Vec<String> {
    fn from(v: WordVocab) -> Self {
        v.words
    }
}

impl WordVocab {
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        WordVocab { words, index }
    }

    /// `<unk>` first, then words by descending frequency, ties alphabetical.
    pub fn build<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        counts.remove(UNK);
        let mut by_freq: Vec<(&str, usize)> = counts.into_iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let words = std::iter::once(UNK.to_owned())
            .chain(by_freq.into_iter().map(|(w, _)| w.to_owned()))
            .collect();
        Self::from_words(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(0)
    }

    pub fn word(&self, id: usize) -> &str {
        self.words.get(id).map_or(UNK, String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

/// Token-id sequences; bigram examples never cross sequence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenCorpus {
    pub vocab_size: usize,
    pub sequences: Vec<Vec<usize>>,
}

impl TokenCorpus {
    pub fn new(vocab_size: usize, sequences: Vec<Vec<usize>>) -> Result<Self, TrainError> {
        if let Some(bad) = sequences.iter().flatten().find(|&&t| t >= vocab_size) {
            return Err(TrainError::Argument(format!(
                "token {bad} outside vocabulary of {vocab_size}"
            )));
        }
        Ok(TokenCorpus {
            vocab_size,
            sequences,
        })
    }

    /// One sequence per pair: prompt tokens followed by response tokens.
    pub fn from_pairs(pairs: &[ConversationPair], vocab: &WordVocab) -> Self {
        let sequences = pairs
            .iter()
            .map(|p| {
                let mut s = vocab.encode(&p.prompt_tokens);
                s.extend(vocab.encode(&p.response_tokens));
                s
            })
            .collect();
        TokenCorpus {
            vocab_size: vocab.len(),
            sequences,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Number of trailing sequences held out for validation.
    pub fn val_count(&self, val_fraction: f64) -> usize {
        let n = self.sequences.len();
        if n < 2 {
            return 0;
        }
        ((n as f64 * val_fraction).ceil() as usize).clamp(1, n - 1)
    }

    /// `(train, validation)` with the last sequences held out.
    pub fn split(&self, val_fraction: f64) -> (&[Vec<usize>], &[Vec<usize>]) {
        let n = self.sequences.len();
        self.sequences.split_at(n - self.val_count(val_fraction))
    }
}

pub fn bigram_examples(sequences: &[Vec<usize>]) -> Vec<Example> {
    sequences
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[0], w[1])))
        .collect()
}

/// Perplexity of the maximum-likelihood unigram model of the targets,
/// evaluated on those same targets: `exp(−Σ (c/N) ln (c/N))`.
pub fn unigram_perplexity(examples: &[Example]) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Argument("no examples".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, t) in examples {
        *counts.entry(t).or_insert(0) += 1;
    }
    let n = examples.len() as f64;
    let entropy: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// First-order Markov chain over `0..vocab_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub transitions: Vec<Vec<f64>>,
}

impl MarkovChain {
    /// Each state moves to `branching` random successors with random weights.
    pub fn random<R: Rng>(vocab_size: usize, branching: usize, rng: &mut R) -> Self {
        let branching = branching.clamp(1, vocab_size);
        let transitions = (0..vocab_size)
            .map(|_| {
                let mut row = vec![0.0; vocab_size];
                let mut states: Vec<usize> = (0..vocab_size).collect();
                for k in 0..branching {
                    let j = rng.gen_range(k..vocab_size);
                    states.swap(k, j);
                    row[states[k]] = rng.gen_range(0.2..1.0);
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= sum);
                row
            })
            .collect();
        MarkovChain { transitions }
    }

    pub fn vocab_size(&self) -> usize {
        self.transitions.len()
    }

    pub fn sample_sequence<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        let mut seq = Vec::with_capacity(len);
        if len == 0 {
            return seq;
        }
        let mut state = rng.gen_range(0..self.vocab_size());
        seq.push(state);
        while seq.len() < len {
            let u: f64 = rng.gen();
            let row = &self.transitions[state];
            let mut acc = 0.0;
            let mut next = row.len() - 1;
            for (j, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            state = next;
            seq.push(state);
        }
        seq
    }

    pub fn sample_corpus<R: Rng>(&self, n_sequences: usize, len: usize, rng: &mut R) -> TokenCorpus {
        let sequences = (0..n_sequences).map(|_| self.sample_sequence(len, rng)).collect();
        TokenCorpus {
            vocab_size: self.vocab_size(),
            sequences,
        }
    }
}

/// The stock synthetic corpus: 16 symbols, 3 successors per state,
/// 100 sequences of 100 tokens.
pub fn markov_fixture(seed: u64) -> (MarkovChain, TokenCorpus) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let chain = MarkovChain::random(16, 3, &mut rng);
    let corpus = chain.sample_corpus(100, 100, &mut rng);
    (chain, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_order_and_unknowns() {
        let v = WordVocab::build(["b", "a", "b", "c", "a", "b"]);
        assert_eq!(v.words, [UNK, "b", "a", "c"]);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("zzz"), 0);
        assert_eq!(v.word(99), UNK);
    }

    #[test]
    fn split_holds_out_tail() {
        let c = TokenCorpus::new(3, (0..10).map(|i| vec![i % 3, 0]).collect()).unwrap();
        let (train, val) = c.split(0.1);
        assert_eq!(train.len(), 9);
        assert_eq!(val.len(), 1);
        assert_eq!(val[0], c.sequences[9]);
        let (_, val) = c.split(0.25);
        assert_eq!(val.len(), 3);
    }

    #[test]
    fn examples_stay_within_sequences() {
        let ex = bigram_examples(&[vec![1, 2, 3], vec![4, 5]]);
        assert_eq!(ex, vec![(1, 2), (2, 3), (4, 5)]);
    }

    #[test]
    fn unigram_baseline() {
        // targets: 1,1,2,2 → uniform over 2 symbols
        let got = unigram_perplexity(&[(0, 1), (0, 1), (0, 2), (0, 2)]).unwrap();
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn markov_rows_are_distributions() {
        let (chain, corpus) = markov_fixture(7);
        for row in &chain.transitions {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 3);
        }
        assert_eq!(corpus.token_count(), 10_000);
        for w in corpus.sequences.iter().flat_map(|s| s.windows(2)) {
            assert!(chain.transitions[w[0]][w[1]] > 0.0);
        }
    }

    #[test]
    fn rejects_out_of_range_tokens() {
        assert!(TokenCorpus::new(2, vec![vec![0, 2]]).is_err());
    }
}
