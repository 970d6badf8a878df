use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::bigram_examples;
use super::monitor::{scenario_monitor, Scenario};
use super::optim::{accumulate, adam_step, clip_gradients, AdamState, ClipOutcome};
use super::{
    Dropout, EarlyStopping, Example, LossScaler, LrPolicy, ParamGroup, ParamSet, StopDecision,
    TinyLM, TokenCorpus, TrainError, TrainingConfig, UnfreezePlan,
};

/// Consecutive applied steps with a non-finite loss before a run is aborted.
pub const DIVERGENCE_LIMIT: usize = 10;

/// Additional loss term evaluated once per optimizer step on the current
/// parameters. Returns the penalty and its gradient.
pub trait Regularizer: Sync {
    fn penalty(&self, model: &TinyLM) -> (f64, ParamSet);
}

/// One validation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Optimizer steps completed, skipped steps included.
    pub step: usize,
    /// Epochs completed.
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the applied steps since the previous round.
    #[serde(rename = "loss")]
    pub train_loss: Option<f64>,
    pub val_perplexity: f64,
    pub frozen_groups: Vec<ParamGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario_nll: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub points: Vec<EvalPoint>,
    pub steps: usize,
    pub skipped_steps: usize,
    pub final_loss_scale: f64,
    /// Set when early stopping ended the run: `(best step, best perplexity)`.
    pub early_stopped: Option<(usize, f64)>,
}

impl TrainingHistory {
    pub fn best(&self) -> Option<&EvalPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&EvalPoint>, p| match best {
                Some(b) if b.val_perplexity <= p.val_perplexity => Some(b),
                _ => Some(p),
            })
    }

    pub fn last(&self) -> Option<&EvalPoint> {
        self.points.last()
    }

    /// One eval point per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TrainError> {
        for p in &self.points {
            let line = serde_json::to_string(p).map_err(|e| TrainError::Format {
                what: "history",
                detail: e.to_string(),
            })?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<EvalPoint>, TrainError> {
        let mut points = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p = serde_json::from_str(&line).map_err(|e| TrainError::Format {
                what: "history",
                detail: format!("line {}: {e}", i + 1),
            })?;
            points.push(p);
        }
        Ok(points)
    }
}

/// Everything besides the model, corpus and scalar config.
pub struct TrainOptions<'a> {
    pub schedule: &'a dyn LrPolicy,
    pub plan: &'a UnfreezePlan,
    pub regularizer: Option<&'a dyn Regularizer>,
    pub scenarios: &'a [Scenario],
    /// Called after every validation round with the current model.
    pub on_eval: Option<&'a mut dyn FnMut(&EvalPoint, &TinyLM) -> Result<(), TrainError>>,
}

impl<'a> TrainOptions<'a> {
    pub fn new(schedule: &'a dyn LrPolicy, plan: &'a UnfreezePlan) -> Self {
        TrainOptions {
            schedule,
            plan,
            regularizer: None,
            scenarios: &[],
            on_eval: None,
        }
    }
}

struct Evaluator<'a> {
    val: Vec<Example>,
    scenarios: &'a [Scenario],
}

impl Evaluator<'_> {
    fn point(
        &self,
        model: &TinyLM,
        step: usize,
        epoch: usize,
        lr: f64,
        train_loss: Option<f64>,
        frozen: &BTreeSet<ParamGroup>,
    ) -> Result<EvalPoint, TrainError> {
        let scenario_nll = if self.scenarios.is_empty() {
            Vec::new()
        } else {
            scenario_monitor(model, self.scenarios)?
        };
        Ok(EvalPoint {
            step,
            epoch,
            lr,
            train_loss,
            val_perplexity: model.mean_nll(&self.val)?.exp(),
            frozen_groups: frozen.iter().copied().collect(),
            scenario_nll,
        })
    }
}

/// Runs the full loop and returns the evaluation history.
///
/// The corpus is split with its trailing sequences held out. Each epoch
/// shuffles the training bigrams and consumes whole effective batches; a
/// trailing partial batch is dropped. Per optimizer step: micro-batch
/// forward/backward at the current loss scale, unscale and overflow check,
/// mean over micro-batches, regularizer, frozen-group masking, global-norm
/// clipping, scaler update, then Adam at `schedule.lr(step)`.
/// Validation runs before the first step, every `eval_every_steps` steps and
/// at the end of each epoch.
pub fn train(
    model: &mut TinyLM,
    corpus: &TokenCorpus,
    cfg: &TrainingConfig,
    mut opts: TrainOptions<'_>,
) -> Result<TrainingHistory, TrainError> {
    cfg.validate()?;
    opts.plan.validate(cfg.epochs)?;
    if corpus.vocab_size != model.vocab_size {
        return Err(TrainError::Argument(format!(
            "corpus vocabulary {} differs from model vocabulary {}",
            corpus.vocab_size, model.vocab_size
        )));
    }
    let (train_seqs, val_seqs) = corpus.split(cfg.val_fraction);
    let train_ex = bigram_examples(train_seqs);
    let val_ex = bigram_examples(val_seqs);
    let batch = cfg.effective_batch();
    if train_ex.len() < batch {
        return Err(TrainError::Argument(format!(
            "corpus yields {} training examples, fewer than one effective batch of {batch}",
            train_ex.len()
        )));
    }
    if val_ex.is_empty() {
        return Err(TrainError::Argument("validation split has no bigrams".into()));
    }
    let steps_per_epoch = train_ex.len() / batch;
    let total_steps = steps_per_epoch * cfg.epochs;
    if let Some(max) = opts.schedule.max_step() {
        if max + 1 < total_steps {
            return Err(TrainError::Config(format!(
                "schedule covers steps 0..={max}, run needs {total_steps} steps"
            )));
        }
    }

    let groups = model.groups();
    let eval = Evaluator {
        val: val_ex,
        scenarios: opts.scenarios,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&model.params);
    let mut scaler = LossScaler::default();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = TrainingHistory::default();

    let mut step = 0usize;
    let mut lr = opts.schedule.lr(0)?;
    let mut loss_sum = 0.0;
    let mut loss_n = 0usize;
    let mut nonfinite_run = 0usize;
    let mut order: Vec<usize> = (0..train_ex.len()).collect();

    let mut round = |model: &TinyLM,
                     history: &mut TrainingHistory,
                     stopper: &mut EarlyStopping,
                     step: usize,
                     epoch: usize,
                     lr: f64,
                     train_loss: Option<f64>,
                     frozen: &BTreeSet<ParamGroup>|
     -> Result<bool, TrainError> {
        let point = eval.point(model, step, epoch, lr, train_loss, frozen)?;
        if let Some(cb) = opts.on_eval.as_mut() {
            cb(&point, model)?;
        }
        let decision = if point.val_perplexity.is_finite() {
            stopper.update(step, point.val_perplexity)
        } else {
            StopDecision::Continue
        };
        history.points.push(point);
        if let StopDecision::Stop {
            best_step,
            best_metric,
        } = decision
        {
            history.early_stopped = Some((best_step, best_metric));
            return Ok(true);
        }
        Ok(false)
    };

    let frozen0 = opts.plan.frozen_at(0, &groups);
    let mut stopped = round(model, &mut history, &mut stopper, 0, 0, lr, None, &frozen0)?;

    'epochs: for epoch in 0..cfg.epochs {
        if stopped {
            break;
        }
        let frozen = opts.plan.frozen_at(epoch, &groups);
        order.shuffle(&mut rng);

        for b in 0..steps_per_epoch {
            let mut micro = Vec::with_capacity(cfg.accum_steps);
            let mut overflow = false;
            let mut step_loss = 0.0;
            for k in 0..cfg.accum_steps {
                let start = (b * cfg.accum_steps + k) * cfg.micro_batch;
                let examples: Vec<Example> = order[start..start + cfg.micro_batch]
                    .iter()
                    .map(|&i| train_ex[i])
                    .collect();
                let dropout = (cfg.dropout > 0.0).then(|| Dropout {
                    rate: cfg.dropout,
                    rng: &mut rng,
                });
                let (loss, mut g) = model.loss_and_grad(
                    &examples,
                    cfg.label_smoothing,
                    dropout,
                    scaler.scale,
                )?;
                g.scale(1.0 / scaler.scale);
                overflow |= !g.all_finite();
                step_loss += loss;
                micro.push(g);
            }
            step_loss /= cfg.accum_steps as f64;

            let mut grad = accumulate(&micro, cfg.accum_steps)?;
            if let Some(reg) = opts.regularizer {
                let (penalty, pg) = reg.penalty(model);
                model.params.check_layout(&pg)?;
                step_loss += penalty;
                grad.add_assign(&pg);
            }
            for &g in &frozen {
                grad.zero_group(g);
            }
            if !overflow {
                overflow = clip_gradients(&mut grad, cfg.clip_max_norm)? == ClipOutcome::Overflow;
            }
            lr = opts.schedule.lr(step)?;
            if scaler.update(overflow) {
                adam_step(&mut adam, &mut model.params, &grad, lr, cfg.weight_decay, &frozen)?;
                if step_loss.is_finite() {
                    nonfinite_run = 0;
                    loss_sum += step_loss;
                    loss_n += 1;
                } else {
                    nonfinite_run += 1;
                    if nonfinite_run >= DIVERGENCE_LIMIT {
                        return Err(TrainError::Diverged {
                            step: step + 1,
                            consecutive: nonfinite_run,
                            last_loss: step_loss,
                        });
                    }
                }
            } else {
                history.skipped_steps += 1;
            }
            step += 1;

            let periodic = cfg.eval_every_steps > 0 && step.is_multiple_of(cfg.eval_every_steps);
            let epoch_end = b + 1 == steps_per_epoch;
            if periodic || epoch_end {
                let train_loss = (loss_n > 0).then(|| loss_sum / loss_n as f64);
                loss_sum = 0.0;
                loss_n = 0;
                let completed = if epoch_end { epoch + 1 } else { epoch };
                stopped = round(
                    model,
                    &mut history,
                    &mut stopper,
                    step,
                    completed,
                    lr,
                    train_loss,
                    &frozen,
                )?;
                if stopped {
                    break 'epochs;
                }
            }
        }
    }

    history.steps = step;
    history.final_loss_scale = scaler.scale;
    Ok(history)
}
