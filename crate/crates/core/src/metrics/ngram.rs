use std::collections::HashMap;
use std::hash::Hash;

use super::MetricError;

/// Multiset of contiguous n-grams borrowed from a token slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts<'a, T: Eq + Hash> {
    pub n: usize,
    pub counts: HashMap<&'a [T], usize>,
    pub total: usize,
}

impl<'a, T: Eq + Hash> NGramCounts<'a, T> {
    pub fn get(&self, gram: &[T]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Counts every window of `n` consecutive tokens.
pub fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> Result<NGramCounts<'_, T>, MetricError> {
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let mut counts = HashMap::new();
    let mut total = 0;
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
        total += 1;
    }
    Ok(NGramCounts { n, counts, total })
}
