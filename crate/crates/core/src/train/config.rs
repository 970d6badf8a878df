use serde::{Deserialize, Serialize};

use super::TrainError;

/// Optimization and regularization settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub micro_batch: usize,
    pub accum_steps: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub clip_max_norm: f64,
    /// Validation cadence in optimizer steps; 0 evaluates only at epoch ends.
    pub eval_every_steps: usize,
    pub patience: usize,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            micro_batch: 32,
            accum_steps: 4,
            epochs: 3,
            weight_decay: 0.01,
            dropout: 0.1,
            label_smoothing: 0.1,
            clip_max_norm: 1.0,
            eval_every_steps: 25,
            patience: 3,
            seed: 0,
            val_fraction: 0.10,
        }
    }
}

impl TrainingConfig {
    pub fn effective_batch(&self) -> usize {
        self.micro_batch * self.accum_steps
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if self.micro_batch == 0 || self.accum_steps == 0 {
            return fail("micro_batch and accum_steps must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail(format!("label_smoothing {} not in [0, 1)", self.label_smoothing));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if !(self.clip_max_norm > 0.0) {
            return fail(format!("clip_max_norm {} must be positive", self.clip_max_norm));
        }
        if self.patience == 0 {
            return fail("patience must be >= 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return fail(format!("val_fraction {} not in (0, 1)", self.val_fraction));
        }
        Ok(())
    }
}
