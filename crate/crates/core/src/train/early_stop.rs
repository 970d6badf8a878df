#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    Continue,
    Stop { best_step: usize, best_metric: f64 },
}

/// Patience-based early stopping on a lower-is-better metric.
///
/// Only a strictly lower value counts as an improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<(usize, f64)>,
    bad_rounds: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be >= 1");
        EarlyStopping {
            patience,
            best: None,
            bad_rounds: 0,
        }
    }

    /// `(step, metric)` of the incumbent best evaluation.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }

    pub fn update(&mut self, step: usize, metric: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if metric >= best => self.bad_rounds += 1,
            _ => {
                self.best = Some((step, metric));
                self.bad_rounds = 0;
            }
        }
        if self.bad_rounds >= self.patience {
            let (best_step, best_metric) = self.best.expect("set on first update");
            StopDecision::Stop {
                best_step,
                best_metric,
            }
        } else {
            StopDecision::Continue
        }
    }
}
