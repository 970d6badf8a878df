use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        LoraConfig {
            rank: 8,
            alpha: 32.0,
        }
    }
}

/// Low-rank update `(alpha / rank) · B · A` for a `d_out x d_in` weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub rank: usize,
    pub alpha: f64,
    /// `rank x d_in`
    pub a: Matrix,
    /// `d_out x rank`
    pub b: Matrix,
}

impl LoraAdapter {
    /// `A` is drawn uniformly from ±1/√d_in; `B` starts at exactly zero so the
    /// adapter is initially a no-op.
    pub fn init<R: Rng>(
        cfg: LoraConfig,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Result<Self, TrainError> {
        if cfg.rank == 0 {
            return Err(TrainError::Config("LoRA rank must be >= 1".into()));
        }
        let bound = 1.0 / (d_in as f64).sqrt();
        let a = Matrix::from_fn(cfg.rank, d_in, |_, _| rng.gen_range(-bound..bound));
        Ok(LoraAdapter {
            rank: cfg.rank,
            alpha: cfg.alpha,
            a,
            b: Matrix::zeros(d_out, cfg.rank),
        })
    }

    pub fn from_parts(alpha: f64, a: Matrix, b: Matrix) -> Result<Self, TrainError> {
        if a.rows != b.cols || a.rows == 0 {
            return Err(TrainError::Shape(format!(
                "A is {}x{}, B is {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )));
        }
        Ok(LoraAdapter {
            rank: a.rows,
            alpha,
            a,
            b,
        })
    }

    pub fn scaling(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    fn check_base(&self, base: &Matrix) -> Result<(), TrainError> {
        if base.cols != self.a.cols || base.rows != self.b.rows {
            return Err(TrainError::Shape(format!(
                "base {}x{} does not match adapter {}x{}",
                base.rows, base.cols, self.b.rows, self.a.cols
            )));
        }
        Ok(())
    }

    /// Dense `(alpha / rank) · B · A`.
    pub fn delta(&self) -> Matrix {
        let mut d = self.b.matmul(&self.a).expect("adapter shapes compose");
        let s = self.scaling();
        d.data.iter_mut().for_each(|x| *x *= s);
        d
    }
}

/// `W·x + (alpha/rank)·B·(A·x)` without materializing `B·A`.
pub fn lora_forward(base: &Matrix, adapter: &LoraAdapter, x: &[f64]) -> Result<Vec<f64>, TrainError> {
    adapter.check_base(base)?;
    let mut y = base.matvec(x)?;
    let ax = adapter.a.matvec(x)?;
    let bax = adapter.b.matvec(&ax)?;
    let s = adapter.scaling();
    for (yi, d) in y.iter_mut().zip(bax) {
        *yi += s * d;
    }
    Ok(y)
}

/// `W + (alpha/rank)·B·A`. The base matrix is not modified.
pub fn merge_lora(base: &Matrix, adapter: &LoraAdapter) -> Result<Matrix, TrainError> {
    adapter.check_base(base)?;
    base.add_scaled(&adapter.delta(), 1.0)
}

/// A frozen weight with an attached adapter that can be folded in once.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraLinear {
    pub base: Matrix,
    pub adapter: LoraAdapter,
    merged: bool,
}

impl LoraLinear {
    pub fn new(base: Matrix, adapter: LoraAdapter) -> Result<Self, TrainError> {
        adapter.check_base(&base)?;
        Ok(LoraLinear {
            base,
            adapter,
            merged: false,
        })
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, TrainError> {
        if self.merged {
            self.base.matvec(x)
        } else {
            lora_forward(&self.base, &self.adapter, x)
        }
    }

    /// Folds the adapter into the base weight. A second call is rejected:
    /// merging again would add the update twice.
    pub fn merge(&mut self) -> Result<(), TrainError> {
        if self.merged {
            return Err(TrainError::Argument("adapter already merged".into()));
        }
        self.base = merge_lora(&self.base, &self.adapter)?;
        self.merged = true;
        Ok(())
    }
}
