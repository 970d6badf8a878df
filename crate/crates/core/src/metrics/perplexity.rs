use super::MetricError;

/// `exp(mean(nll))` over per-token natural-log negative log-likelihoods.
pub fn perplexity(token_nlls: &[f64]) -> Result<f64, MetricError> {
    if token_nlls.is_empty() {
        return Err(MetricError::Empty);
    }
    if token_nlls.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(MetricError::InvalidLikelihood);
    }
    let mean = token_nlls.iter().sum::<f64>() / token_nlls.len() as f64;
    Ok(mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_over_four() {
        let got = perplexity(&[4f64.ln(); 7]).unwrap();
        assert!((got - 4.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_model() {
        assert_eq!(perplexity(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn mixed() {
        let got = perplexity(&[2f64.ln(), 8f64.ln()]).unwrap();
        assert!((got - 4.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(perplexity(&[]), Err(MetricError::Empty));
        assert_eq!(perplexity(&[-1.0]), Err(MetricError::InvalidLikelihood));
        assert_eq!(perplexity(&[f64::NAN]), Err(MetricError::InvalidLikelihood));
    }
}
