use serde::{Deserialize, Serialize};

use super::{TinyLM, TrainError};

/// A prompt and the response the model should find likely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub prompt: Vec<usize>,
    pub response: Vec<usize>,
}

impl Scenario {
    pub fn new(prompt: Vec<usize>, response: Vec<usize>) -> Self {
        Scenario { prompt, response }
    }
}

/// Mean per-token NLL of each scenario's response, the first response token
/// conditioned on the last prompt token. Only reads the model.
pub fn scenario_monitor(model: &TinyLM, scenarios: &[Scenario]) -> Result<Vec<f64>, TrainError> {
    if scenarios.is_empty() {
        return Err(TrainError::Argument("no scenarios to monitor".into()));
    }
    scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let Some(&last) = s.prompt.last() else {
                return Err(TrainError::Argument(format!("scenario {i} has an empty prompt")));
            };
            if s.response.is_empty() {
                return Err(TrainError::Argument(format!("scenario {i} has an empty response")));
            }
            let mut prev = last;
            let mut sum = 0.0;
            for &t in &s.response {
                sum += model.nll(prev, t)?;
                prev = t;
            }
            Ok(sum / s.response.len() as f64)
        })
        .collect()
}
