use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use solace_core::train::{
    LoraConfig, LrSchedule, ParamGroup, TrainError, TrainingConfig, UnfreezePlan, UnfreezeStage,
    WordVocab,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: usize,
    #[serde(default)]
    pub lora: Option<LoraConfig>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { hidden: 32, lora: None }
    }
}

/// Step counts can be given directly or as a fraction of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    WarmupLinearDecay {
        base_lr: f64,
        #[serde(default)]
        warmup_steps: Option<usize>,
        #[serde(default)]
        warmup_fraction: Option<f64>,
    },
    DynamicTwoPhase {
        base_lr: f64,
        peak_lr: f64,
        final_lr: f64,
        #[serde(default)]
        ramp_steps: Option<usize>,
        #[serde(default)]
        ramp_fraction: Option<f64>,
    },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::WarmupLinearDecay {
            base_lr: 0.01,
            warmup_steps: None,
            warmup_fraction: Some(0.1),
        }
    }
}

fn steps(name: &str, fixed: Option<usize>, fraction: Option<f64>, total: usize) -> Result<usize, TrainError> {
    match (fixed, fraction) {
        (Some(s), None) => Ok(s),
        (None, Some(f)) if (0.0..=1.0).contains(&f) => Ok((f * total as f64).round() as usize),
        (None, Some(f)) => Err(TrainError::Config(format!("{name}_fraction {f} not in [0, 1]"))),
        _ => Err(TrainError::Config(format!("give exactly one of {name}_steps and {name}_fraction"))),
    }
}

impl ScheduleSpec {
    pub fn resolve(&self, total_steps: usize) -> Result<LrSchedule, TrainError> {
        let s = match *self {
            ScheduleSpec::WarmupLinearDecay {
                base_lr,
                warmup_steps,
                warmup_fraction,
            } => LrSchedule::warmup_linear_decay(
                base_lr,
                steps("warmup", warmup_steps, warmup_fraction, total_steps)?,
                total_steps,
            ),
            ScheduleSpec::DynamicTwoPhase {
                base_lr,
                peak_lr,
                final_lr,
                ramp_steps,
                ramp_fraction,
            } => LrSchedule::dynamic_two_phase(
                base_lr,
                peak_lr,
                steps("ramp", ramp_steps, ramp_fraction, total_steps)?,
                final_lr,
                total_steps,
            ),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfreezeSpec {
    /// Every group trainable for the whole run.
    #[default]
    All,
    /// Output projection alone for two epochs, then everything. An adapter,
    /// when present, trains throughout.
    Staged,
    Stages(Vec<UnfreezeStage>),
}

impl UnfreezeSpec {
    pub fn plan(&self, epochs: usize, groups: &[ParamGroup]) -> Result<UnfreezePlan, TrainError> {
        let plan = match self {
            UnfreezeSpec::All => UnfreezePlan::all_trainable(epochs, groups),
            UnfreezeSpec::Staged => {
                let mut plan = UnfreezePlan::staged_default();
                if groups.contains(&ParamGroup::Adapter) {
                    for stage in &mut plan.stages {
                        stage.trainable.insert(ParamGroup::Adapter);
                    }
                }
                plan
            }
            UnfreezeSpec::Stages(stages) => UnfreezePlan { stages: stages.clone() },
        };
        plan.validate(epochs)?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSpec {
    /// Upper bound on generated reply length; replies also stop at the
    /// reference length.
    pub max_len: usize,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec { max_len: 24 }
    }
}

/// The `train --config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub model: ModelSpec,
    pub schedule: ScheduleSpec,
    pub unfreeze: UnfreezeSpec,
    pub generation: GenerationSpec,
}

pub const MANIFEST_FORMAT: &str = "solace-run-v1";
pub const MANIFEST_FILE: &str = "run.json";

/// Everything `curves` needs besides the history: vocabulary, held-out
/// pairs and the checkpoint written at each evaluation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub vocab: WordVocab,
    pub steps_per_epoch: usize,
    pub generation: GenerationSpec,
    pub val_pairs: Vec<ValPair>,
    pub checkpoints: Vec<CheckpointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValPair {
    pub prompt_tokens: Vec<String>,
    pub response_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointEntry {
    pub step: usize,
    pub file: String,
}

/// `runs/h.jsonl` keeps its checkpoints in `runs/h.checkpoints/`.
pub fn checkpoint_dir(history: &Path) -> PathBuf {
    history.with_extension("checkpoints")
}

pub fn checkpoint_name(step: usize) -> String {
    format!("step-{step:08}.bin")
}
