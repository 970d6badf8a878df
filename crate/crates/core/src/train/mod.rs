//! Fine-tuning control loop on a two-layer bigram language model.

mod checkpoint;
mod config;
mod data;
mod early_stop;
mod lora;
mod loss;
mod model;
mod monitor;
mod optim;
mod scaler;
mod schedule;
mod tensor;
mod trainer;
mod tune;
mod unfreeze;

use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_FORMAT};
pub use config::TrainingConfig;
pub use data::{
    bigram_examples, markov_fixture, unigram_perplexity, MarkovChain, TokenCorpus, WordVocab, UNK,
};
pub use early_stop::{EarlyStopping, StopDecision};
pub use lora::{lora_forward, merge_lora, LoraAdapter, LoraConfig, LoraLinear};
pub use loss::{label_smoothed_ce, smoothed_target, softmax, SmoothedLoss};
pub use model::{Dropout, Example, TinyLM};
pub use monitor::{scenario_monitor, Scenario};
pub use optim::{accumulate, adam_step, clip_gradients, AdamState, ClipOutcome};
pub use scaler::LossScaler;
pub use schedule::{LrPolicy, LrSchedule, ScheduleKind};
pub use tensor::{Matrix, ParamGroup, ParamSet, Tensor};
pub use trainer::{train, EvalPoint, Regularizer, TrainOptions, TrainingHistory, DIVERGENCE_LIMIT};
pub use tune::{tune, SearchSpace, TrialConfig, TrialResult, TuneOutcome, TuneSettings};
pub use unfreeze::{UnfreezePlan, UnfreezeStage};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at step {step}: loss non-finite for {consecutive} consecutive applied steps (last loss {last_loss})")]
    Diverged {
        step: usize,
        consecutive: usize,
        last_loss: f64,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
