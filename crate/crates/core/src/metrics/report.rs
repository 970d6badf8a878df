use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    bleu, coherence, distinct_n_with_mode, perplexity, rouge_n, split_sentences, BleuConfig,
    DistinctMode, MetricError, TfEmbedder, Vocabulary,
};
use crate::corpus::{normalize_text, tokenize, PipelineConfig};

/// One line of an evaluation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    #[serde(default)]
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bleu: BleuConfig,
    pub distinct_mode: DistinctMode,
}

/// Corpus-level scores. `None` serializes as `null` and marks a metric that
/// had nothing to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: Option<f64>,
    pub rouge_1: Option<f64>,
    pub rouge_2: Option<f64>,
    pub coherence: Option<f64>,
    pub distinct_1: Option<f64>,
    pub distinct_2: Option<f64>,
    pub perplexity: Option<f64>,
    pub n_pairs: usize,
    pub skipped: usize,
}

struct PairScores {
    bleu: f64,
    rouge_1: f64,
    rouge_2: f64,
}

fn words(text: &str) -> Vec<String> {
    tokenize(&normalize_text(text, &PipelineConfig::default()))
}

fn score_pair(
    candidate: &[String],
    references: &[Vec<String>],
    cfg: &EvalConfig,
) -> Result<PairScores, MetricError> {
    Ok(PairScores {
        bleu: bleu(candidate, references, &cfg.bleu)?,
        rouge_1: rouge_n(candidate, references, 1)?,
        rouge_2: rouge_n(candidate, references, 2)?,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores a corpus of candidate/reference pairs.
///
/// BLEU and ROUGE are per-pair averages over the pairs that could be scored;
/// a pair whose candidate is empty (or whose references are too short for
/// ROUGE-2) is counted in `skipped` instead. Distinct-n is computed over
/// `distinct_responses` when given, else over the candidates. Coherence
/// averages over candidates with at least two sentences. Sums run in input
/// order so the report is bit-stable.
pub fn evaluate_corpus(
    pairs: &[EvalPair],
    distinct_responses: Option<&[Vec<String>]>,
    token_nlls: Option<&[f64]>,
    cfg: &EvalConfig,
) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    cfg.bleu.validate()?;

    let tokenized: Vec<(Vec<String>, Vec<Vec<String>>)> = pairs
        .par_iter()
        .map(|p| (words(&p.candidate), p.references.iter().map(|r| words(r)).collect()))
        .collect();
    let scores: Vec<Option<PairScores>> = tokenized
        .par_iter()
        .map(|(cand, refs)| score_pair(cand, refs, cfg).ok())
        .collect();

    let scored: Vec<&PairScores> = scores.iter().flatten().collect();
    let skipped = pairs.len() - scored.len();

    let sentences: Vec<Vec<Vec<String>>> = pairs
        .par_iter()
        .map(|p| split_sentences(&p.candidate))
        .collect();
    let vocab = Vocabulary::build(sentences.iter().flatten().flatten().map(String::as_str));
    let embedder = TfEmbedder::new(vocab);
    let coherences: Vec<Option<f64>> = pairs
        .par_iter()
        .zip(&sentences)
        .map(|(p, s)| coherence(&p.candidate, |_| s.clone(), &embedder))
        .collect();

    let candidates: Vec<Vec<String>> = tokenized.into_iter().map(|(c, _)| c).collect();
    let distinct_src = distinct_responses.unwrap_or(&candidates);

    Ok(MetricReport {
        bleu: mean(scored.iter().map(|s| s.bleu)),
        rouge_1: mean(scored.iter().map(|s| s.rouge_1)),
        rouge_2: mean(scored.iter().map(|s| s.rouge_2)),
        coherence: mean(coherences.iter().flatten().copied()),
        distinct_1: distinct_n_with_mode(distinct_src, 1, cfg.distinct_mode).ok(),
        distinct_2: distinct_n_with_mode(distinct_src, 2, cfg.distinct_mode).ok(),
        perplexity: token_nlls.and_then(|n| perplexity(n).ok()),
        n_pairs: scored.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: &str, r: &str) -> EvalPair {
        EvalPair {
            id: String::new(),
            candidate: c.into(),
            references: vec![r.into()],
        }
    }

    #[test]
    fn identity_pair() {
        let p = pair("The cat sat on the mat.", "the cat sat on the mat");
        let rep = evaluate_corpus(&[p], None, None, &EvalConfig::default()).unwrap();
        assert_eq!(rep.bleu, Some(1.0));
        assert_eq!(rep.rouge_1, Some(1.0));
        assert_eq!(rep.n_pairs, 1);
        assert_eq!(rep.coherence, None);
        assert_eq!(rep.perplexity, None);
    }

    #[test]
    fn empty_candidate_is_skipped() {
        let mut pairs: Vec<_> = (0..10)
            .map(|i| pair(&format!("you are doing well {i}"), "you are doing well today"))
            .collect();
        pairs[3].candidate = "   ".into();
        let rep = evaluate_corpus(&pairs, None, None, &EvalConfig::default()).unwrap();
        assert_eq!(rep.n_pairs, 9);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn empty_corpus_errors() {
        assert_eq!(
            evaluate_corpus(&[], None, None, &EvalConfig::default()),
            Err(MetricError::Empty)
        );
    }

    #[test]
    fn report_keys() {
        let rep = evaluate_corpus(&[pair("a b c. a b c.", "a b c")], None, Some(&[0.0]), &EvalConfig::default())
            .unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "bleu", "coherence", "distinct_1", "distinct_2", "n_pairs", "perplexity",
                "rouge_1", "rouge_2", "skipped"
            ]
        );
        assert_eq!(rep.coherence, Some(1.0));
        assert_eq!(rep.perplexity, Some(1.0));
    }
}
