use serde::{Deserialize, Serialize};

use super::TrainError;

/// Anything that maps an optimizer step to a learning rate.
pub trait LrPolicy {
    fn lr(&self, step: usize) -> Result<f64, TrainError>;

    /// Largest step the policy is defined for, if bounded.
    fn max_step(&self) -> Option<usize> {
        None
    }
}

impl<F: Fn(usize) -> f64> LrPolicy for F {
    fn lr(&self, step: usize) -> Result<f64, TrainError> {
        Ok(self(step))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// 0 → base_lr over the warmup, then base_lr → 0 at `total_steps`.
    WarmupLinearDecay,
    /// base_lr → peak_lr over `ramp_steps`, then peak_lr → final_lr.
    DynamicTwoPhase,
}

/// Piecewise-linear learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub peak_lr: f64,
    pub ramp_steps: usize,
    pub final_lr: f64,
}

impl LrSchedule {
    pub fn warmup_linear_decay(base_lr: f64, warmup_steps: usize, total_steps: usize) -> Self {
        LrSchedule {
            kind: ScheduleKind::WarmupLinearDecay,
            base_lr,
            warmup_steps,
            total_steps,
            peak_lr: 5e-5,
            ramp_steps: 1000,
            final_lr: 1e-6,
        }
    }

    pub fn dynamic_two_phase(
        base_lr: f64,
        peak_lr: f64,
        ramp_steps: usize,
        final_lr: f64,
        total_steps: usize,
    ) -> Self {
        LrSchedule {
            kind: ScheduleKind::DynamicTwoPhase,
            base_lr,
            warmup_steps: 0,
            total_steps,
            peak_lr,
            ramp_steps,
            final_lr,
        }
    }

    /// 2e-5 with 500 warmup steps, then linear decay.
    pub fn default_warmup(total_steps: usize) -> Self {
        Self::warmup_linear_decay(2e-5, 500, total_steps)
    }

    /// 2e-5 → 5e-5 over 1000 steps, then down to 1e-6.
    pub fn default_dynamic(total_steps: usize) -> Self {
        Self::dynamic_two_phase(2e-5, 5e-5, 1000, 1e-6, total_steps)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TrainError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("base_lr", self.base_lr)?;
        match self.kind {
            ScheduleKind::WarmupLinearDecay => {
                if self.warmup_steps > self.total_steps {
                    return Err(TrainError::Config(format!(
                        "warmup_steps {} exceeds total_steps {}",
                        self.warmup_steps, self.total_steps
                    )));
                }
            }
            ScheduleKind::DynamicTwoPhase => {
                positive("peak_lr", self.peak_lr)?;
                positive("final_lr", self.final_lr)?;
                if self.ramp_steps >= self.total_steps {
                    return Err(TrainError::Config(format!(
                        "ramp_steps {} must be below total_steps {}",
                        self.ramp_steps, self.total_steps
                    )));
                }
            }
        }
        Ok(())
    }

    /// Learning rate at `step`, for `0 <= step <= total_steps`.
    pub fn lr_at(&self, step: usize) -> Result<f64, TrainError> {
        self.validate()?;
        if step > self.total_steps {
            return Err(TrainError::Argument(format!(
                "step {step} beyond total_steps {}",
                self.total_steps
            )));
        }
        Ok(match self.kind {
            ScheduleKind::WarmupLinearDecay => {
                if step < self.warmup_steps {
                    lerp(0.0, self.base_lr, step, self.warmup_steps)
                } else {
                    lerp(
                        self.base_lr,
                        0.0,
                        step - self.warmup_steps,
                        self.total_steps - self.warmup_steps,
                    )
                }
            }
            ScheduleKind::DynamicTwoPhase => {
                if step < self.ramp_steps {
                    lerp(self.base_lr, self.peak_lr, step, self.ramp_steps)
                } else {
                    lerp(
                        self.peak_lr,
                        self.final_lr,
                        step - self.ramp_steps,
                        self.total_steps - self.ramp_steps,
                    )
                }
            }
        })
    }

    /// Steepest absolute slope over all segments, per step.
    pub fn max_slope(&self) -> f64 {
        let slope = |a: f64, b: f64, len: usize| {
            if len == 0 {
                0.0
            } else {
                (b - a).abs() / len as f64
            }
        };
        match self.kind {
            ScheduleKind::WarmupLinearDecay => slope(0.0, self.base_lr, self.warmup_steps)
                .max(slope(self.base_lr, 0.0, self.total_steps - self.warmup_steps)),
            ScheduleKind::DynamicTwoPhase => slope(self.base_lr, self.peak_lr, self.ramp_steps)
                .max(slope(self.peak_lr, self.final_lr, self.total_steps - self.ramp_steps)),
        }
    }
}

/// `a·(1−t) + b·t` with `t = pos/len`; exact at both ends.
fn lerp(a: f64, b: f64, pos: usize, len: usize) -> f64 {
    if len == 0 {
        return b;
    }
    let t = pos as f64 / len as f64;
    a * (1.0 - t) + b * t
}

impl LrPolicy for LrSchedule {
    fn lr(&self, step: usize) -> Result<f64, TrainError> {
        self.lr_at(step)
    }

    fn max_step(&self) -> Option<usize> {
        Some(self.total_steps)
    }
}
