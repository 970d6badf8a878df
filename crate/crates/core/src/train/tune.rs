//! Seeded random search over the fine-tuning hyperparameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    train, LrSchedule, TinyLM, TokenCorpus, TrainError, TrainOptions, TrainingConfig, UnfreezePlan,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    /// Inclusive bounds, sampled log-uniformly.
    pub lr: (f64, f64),
    pub batch_sizes: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub weight_decays: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lr: (1e-5, 5e-5),
            batch_sizes: vec![16, 32, 64],
            dropouts: vec![0.1, 0.2, 0.3],
            weight_decays: vec![0.01, 0.1],
        }
    }
}

impl SearchSpace {
    /// Every dimension pinned to a single value.
    pub fn point(cfg: &TrialConfig) -> Self {
        SearchSpace {
            lr: (cfg.lr, cfg.lr),
            batch_sizes: vec![cfg.micro_batch],
            dropouts: vec![cfg.dropout],
            weight_decays: vec![cfg.weight_decay],
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let (lo, hi) = self.lr;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(TrainError::Config(format!("lr range ({lo}, {hi}) is invalid")));
        }
        if self.batch_sizes.is_empty() || self.dropouts.is_empty() || self.weight_decays.is_empty() {
            return Err(TrainError::Config("every search dimension needs a value".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> TrialConfig {
        let (lo, hi) = self.lr;
        let u: f64 = rng.gen();
        let lr = if lo == hi {
            lo
        } else {
            (lo.ln() * (1.0 - u) + hi.ln() * u).exp()
        };
        TrialConfig {
            lr,
            micro_batch: self.batch_sizes[rng.gen_range(0..self.batch_sizes.len())],
            dropout: self.dropouts[rng.gen_range(0..self.dropouts.len())],
            weight_decay: self.weight_decays[rng.gen_range(0..self.weight_decays.len())],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub lr: f64,
    pub micro_batch: usize,
    pub dropout: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: TrialConfig,
    /// Final validation perplexity; `None` when the run failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub best: TrialResult,
    pub trials: Vec<TrialResult>,
}

/// Fixed parts of every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneSettings {
    pub hidden: usize,
    /// Remaining training fields; the searched ones are overwritten.
    pub base: TrainingConfig,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            hidden: 16,
            base: TrainingConfig {
                epochs: 1,
                eval_every_steps: 0,
                ..TrainingConfig::default()
            },
        }
    }
}

fn run_trial(
    corpus: &TokenCorpus,
    settings: &TuneSettings,
    trial: usize,
    tc: TrialConfig,
    seed: u64,
) -> TrialResult {
    let cfg = TrainingConfig {
        micro_batch: tc.micro_batch,
        dropout: tc.dropout,
        weight_decay: tc.weight_decay,
        seed,
        ..settings.base.clone()
    };
    let outcome = (|| -> Result<f64, TrainError> {
        cfg.validate()?;
        let (train_seqs, _) = corpus.split(cfg.val_fraction);
        let n_train = super::bigram_examples(train_seqs).len();
        let total = (n_train / cfg.effective_batch()).max(1) * cfg.epochs;
        let schedule = LrSchedule::warmup_linear_decay(tc.lr, total / 10, total);
        let plan = UnfreezePlan::all_trainable(cfg.epochs, &super::ParamGroup::ALL);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = TinyLM::new(corpus.vocab_size, settings.hidden, &mut rng);
        let history = train(&mut model, corpus, &cfg, TrainOptions::new(&schedule, &plan))?;
        history
            .last()
            .map(|p| p.val_perplexity)
            .ok_or_else(|| TrainError::Argument("run produced no evaluation".into()))
    })();
    match outcome {
        Ok(ppl) if ppl.is_finite() => TrialResult {
            trial,
            config: tc,
            objective: Some(ppl),
            error: None,
        },
        Ok(ppl) => TrialResult {
            trial,
            config: tc,
            objective: None,
            error: Some(format!("non-finite objective {ppl}")),
        },
        Err(e) => TrialResult {
            trial,
            config: tc,
            objective: None,
            error: Some(e.to_string()),
        },
    }
}

/// Samples `n_trials` configurations and trains each one briefly.
///
/// Trial `i` draws its configuration from stream `i` of a generator seeded
/// with `seed`, so the log does not depend on how trials are scheduled.
/// Every trial trains with the same `seed`, making the objective a function
/// of the configuration alone. Ties go to the lowest trial index.
pub fn tune(
    corpus: &TokenCorpus,
    space: &SearchSpace,
    settings: &TuneSettings,
    n_trials: usize,
    seed: u64,
) -> Result<TuneOutcome, TrainError> {
    if n_trials == 0 {
        return Err(TrainError::Argument("n_trials must be >= 1".into()));
    }
    space.validate()?;
    let configs: Vec<TrialConfig> = (0..n_trials)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            space.sample(&mut rng)
        })
        .collect();
    let trials: Vec<TrialResult> = configs
        .par_iter()
        .enumerate()
        .map(|(i, &tc)| run_trial(corpus, settings, i, tc, seed))
        .collect();
    let best = trials
        .iter()
        .filter_map(|t| t.objective.map(|o| (t, o)))
        .fold(None::<(&TrialResult, f64)>, |best, (t, o)| match best {
            Some((_, bo)) if bo <= o => best,
            _ => Some((t, o)),
        })
        .map(|(t, _)| t.clone())
        .ok_or_else(|| {
            TrainError::Argument(format!(
                "all {n_trials} trials failed; first error: {}",
                trials[0].error.as_deref().unwrap_or("unknown")
            ))
        })?;
    Ok(TuneOutcome { best, trials })
}
