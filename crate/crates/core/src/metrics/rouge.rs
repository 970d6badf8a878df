use std::hash::Hash;

use super::{ngram_counts, MetricError};

/// ROUGE-N recall summed over the whole reference set: clipped matches of
/// every reference n-gram divided by the total reference n-gram count.
pub fn rouge_n<T, R>(candidate: &[T], references: &[R], n: usize) -> Result<f64, MetricError>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let cand = ngram_counts(candidate, n)?;
    let mut matched = 0usize;
    let mut total = 0usize;
    for r in references {
        let rc = ngram_counts(r.as_ref(), n)?;
        total += rc.total;
        matched += rc
            .counts
            .iter()
            .map(|(gram, &count)| count.min(cand.get(gram)))
            .sum::<usize>();
    }
    if total == 0 {
        return Err(MetricError::ReferencesTooShort);
    }
    Ok(matched as f64 / total as f64)
}
