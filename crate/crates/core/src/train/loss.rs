use super::TrainError;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Target distribution `(1−ε)·onehot(target) + ε/K`.
pub fn smoothed_target(k: usize, target: usize, epsilon: f64) -> Vec<f64> {
    let mut q = vec![epsilon / k as f64; k];
    q[target] += 1.0 - epsilon;
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedLoss {
    /// `+inf` when some `p_k = 0` carries target mass.
    pub loss: f64,
    /// Gradient with respect to the pre-softmax logits: `p − q`.
    pub grad_logits: Vec<f64>,
}

/// Cross-entropy against the label-smoothed target.
pub fn label_smoothed_ce(probs: &[f64], target: usize, epsilon: f64) -> Result<SmoothedLoss, TrainError> {
    let k = probs.len();
    if k == 0 || target >= k {
        return Err(TrainError::Argument(format!(
            "target {target} outside {k} classes"
        )));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(TrainError::Argument(format!("smoothing {epsilon} not in [0, 1)")));
    }
    let q = smoothed_target(k, target, epsilon);
    let loss = q
        .iter()
        .zip(probs)
        .filter(|(qk, _)| **qk > 0.0)
        .map(|(qk, pk)| -qk * pk.ln())
        .sum();
    let grad_logits = probs.iter().zip(&q).map(|(p, q)| p - q).collect();
    Ok(SmoothedLoss { loss, grad_logits })
}
