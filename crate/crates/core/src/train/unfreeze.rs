use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ParamGroup, TrainError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnfreezeStage {
    pub epochs: usize,
    pub trainable: BTreeSet<ParamGroup>,
}

/// Which parameter groups train during which epochs.
///
/// Stages run back to back; each stage's trainable set must contain the
/// previous one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnfreezePlan {
    pub stages: Vec<UnfreezeStage>,
}

impl UnfreezePlan {
    pub fn all_trainable(epochs: usize, groups: &[ParamGroup]) -> Self {
        UnfreezePlan {
            stages: vec![UnfreezeStage {
                epochs,
                trainable: groups.iter().copied().collect(),
            }],
        }
    }

    /// Output projection alone for two epochs, then everything for one.
    pub fn staged_default() -> Self {
        UnfreezePlan {
            stages: vec![
                UnfreezeStage {
                    epochs: 2,
                    trainable: BTreeSet::from([ParamGroup::Output]),
                },
                UnfreezeStage {
                    epochs: 1,
                    trainable: BTreeSet::from([ParamGroup::Input, ParamGroup::Output]),
                },
            ],
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn validate(&self, epochs: usize) -> Result<(), TrainError> {
        if self.total_epochs() != epochs {
            return Err(TrainError::Config(format!(
                "unfreeze plan covers {} epochs, training runs {epochs}",
                self.total_epochs()
            )));
        }
        for pair in self.stages.windows(2) {
            if !pair[0].trainable.is_subset(&pair[1].trainable) {
                return Err(TrainError::Config(
                    "unfreeze plan must never re-freeze a group".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn trainable_at(&self, epoch: usize) -> BTreeSet<ParamGroup> {
        let mut end = 0;
        for stage in &self.stages {
            end += stage.epochs;
            if epoch < end {
                return stage.trainable.clone();
            }
        }
        self.stages.last().map(|s| s.trainable.clone()).unwrap_or_default()
    }

    /// Groups of `groups` that are frozen during `epoch` (0-based).
    pub fn frozen_at(&self, epoch: usize, groups: &[ParamGroup]) -> BTreeSet<ParamGroup> {
        let trainable = self.trainable_at(epoch);
        groups.iter().copied().filter(|g| !trainable.contains(g)).collect()
    }
}
