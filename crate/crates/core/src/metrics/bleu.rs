use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{ngram_counts, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Smoothing {
    /// Any zero n-gram precision makes the score zero.
    #[default]
    None,
    /// A zero match count is replaced by `epsilon`.
    AddEpsilon { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub weights: Vec<f64>,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self::uniform(4)
    }
}

impl BleuConfig {
    pub fn uniform(max_order: usize) -> Self {
        BleuConfig {
            max_order,
            weights: vec![1.0 / max_order as f64; max_order],
            smoothing: Smoothing::None,
        }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_order == 0 {
            return Err(MetricError::Config("max_order must be >= 1".into()));
        }
        if self.weights.len() != self.max_order {
            return Err(MetricError::Config(format!(
                "expected {} weights, got {}",
                self.max_order,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricError::Config("weights must be non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MetricError::Config(format!("weights sum to {sum}, not 1")));
        }
        if let Smoothing::AddEpsilon { epsilon } = self.smoothing {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(MetricError::Config("epsilon must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Sentence BLEU with clipped n-gram precision and brevity penalty.
///
/// The brevity penalty uses the reference length closest to the candidate
/// length, preferring the shorter one on ties.
pub fn bleu<T, R>(candidate: &[T], references: &[R], cfg: &BleuConfig) -> Result<f64, MetricError>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    cfg.validate()?;
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }

    let mut score = 1.0;
    let mut zero_precision = false;
    for (i, &weight) in cfg.weights.iter().enumerate() {
        let n = i + 1;
        let cand = ngram_counts(candidate, n)?;
        let refs = references
            .iter()
            .map(|r| ngram_counts(r.as_ref(), n))
            .collect::<Result<Vec<_>, _>>()?;
        let matched: usize = cand
            .counts
            .iter()
            .map(|(gram, &count)| {
                let max_ref = refs.iter().map(|r| r.get(gram)).max().unwrap_or(0);
                count.min(max_ref)
            })
            .sum();

        let precision = match cfg.smoothing {
            Smoothing::None => {
                if matched == 0 {
                    zero_precision = true;
                    0.0
                } else {
                    matched as f64 / cand.total as f64
                }
            }
            Smoothing::AddEpsilon { epsilon } => {
                let num = if matched == 0 { epsilon } else { matched as f64 };
                num / cand.total.max(1) as f64
            }
        };
        // weighted geometric mean; powf keeps p^1 and 1^w exact
        score *= precision.powf(weight);
    }
    if zero_precision {
        return Ok(0.0);
    }

    let c = candidate.len();
    let r = closest_ref_len(c, references);
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    Ok(bp * score)
}

fn closest_ref_len<T, R: AsRef<[T]>>(c: usize, references: &[R]) -> usize {
    references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references non-empty")
}
