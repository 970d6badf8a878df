use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{ngram_counts, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistinctMode {
    /// Unique n-grams over all responses / all n-grams over all responses.
    #[default]
    Pooled,
    /// Mean of the per-response ratios, over responses with at least n tokens.
    PerResponseMean,
}

/// Distinct-n pooled across every response.
pub fn distinct_n<T, R>(responses: &[R], n: usize) -> Result<f64, MetricError>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    distinct_n_with_mode(responses, n, DistinctMode::Pooled)
}

pub fn distinct_n_with_mode<T, R>(
    responses: &[R],
    n: usize,
    mode: DistinctMode,
) -> Result<f64, MetricError>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    match mode {
        DistinctMode::Pooled => {
            let mut unique: HashSet<&[T]> = HashSet::new();
            let mut total = 0usize;
            for r in responses {
                for w in r.as_ref().windows(n) {
                    unique.insert(w);
                    total += 1;
                }
            }
            if total == 0 {
                return Err(MetricError::NoNGrams);
            }
            Ok(unique.len() as f64 / total as f64)
        }
        DistinctMode::PerResponseMean => {
            let mut sum = 0.0;
            let mut scored = 0usize;
            for r in responses {
                let c = ngram_counts(r.as_ref(), n)?;
                if c.total > 0 {
                    sum += c.distinct() as f64 / c.total as f64;
                    scored += 1;
                }
            }
            if scored == 0 {
                return Err(MetricError::NoNGrams);
            }
            Ok(sum / scored as f64)
        }
    }
}
