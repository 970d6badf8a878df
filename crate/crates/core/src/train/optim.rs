//! Adam with decoupled weight decay, global-norm clipping and gradient
//! accumulation.

use std::collections::BTreeSet;

use super::{ParamGroup, ParamSet, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamSet,
    pub v: ParamSet,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step.
///
/// Weight decay is decoupled: non-bias parameters are first multiplied by
/// `1 − lr·weight_decay`. Tensors in `frozen` groups and their moments are
/// left untouched.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamSet,
    grads: &ParamSet,
    lr: f64,
    weight_decay: f64,
    frozen: &BTreeSet<ParamGroup>,
) -> Result<(), TrainError> {
    params.check_layout(grads)?;
    params.check_layout(&state.m)?;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);

    for (i, p) in params.tensors.iter_mut().enumerate() {
        if frozen.contains(&p.group) {
            continue;
        }
        let g = &grads.tensors[i].data;
        let m = &mut state.m.tensors[i].data;
        let v = &mut state.v.tensors[i].data;
        let decay = if p.is_bias { 1.0 } else { 1.0 - lr * weight_decay };
        for j in 0..p.data.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            p.data[j] = p.data[j] * decay - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClipOutcome {
    /// Global L2 norm before clipping.
    Norm(f64),
    /// A gradient entry was non-finite; gradients were left as they were.
    Overflow,
}

/// Rescales all gradients jointly so their global L2 norm is at most
/// `max_norm`.
pub fn clip_gradients(grads: &mut ParamSet, max_norm: f64) -> Result<ClipOutcome, TrainError> {
    if !(max_norm > 0.0 && max_norm.is_finite()) {
        return Err(TrainError::Argument(format!("max_norm must be positive, got {max_norm}")));
    }
    if !grads.all_finite() {
        return Ok(ClipOutcome::Overflow);
    }
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    Ok(ClipOutcome::Norm(norm))
}

/// Elementwise mean of `accum_steps` micro-batch gradients.
pub fn accumulate(micro_grads: &[ParamSet], accum_steps: usize) -> Result<ParamSet, TrainError> {
    if micro_grads.len() != accum_steps || accum_steps == 0 {
        return Err(TrainError::Argument(format!(
            "expected {accum_steps} micro-batch gradients, got {}",
            micro_grads.len()
        )));
    }
    let mut sum = micro_grads[0].clone();
    for g in &micro_grads[1..] {
        sum.check_layout(g)?;
        sum.add_assign(g);
    }
    sum.scale(1.0 / accum_steps as f64);
    Ok(sum)
}
