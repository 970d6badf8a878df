use std::fmt;

use solace_core::corpus::CorpusError;
use solace_core::metrics::MetricError;
use solace_core::train::TrainError;
use solace_gateway::GatewayError;

/// A failed command. Bad input maps to exit code 1, failures while doing
/// the work map to exit code 2.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Failure::Invalid(anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Failure::Runtime(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    /// Prefixes the message, keeping the class.
    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Invalid(e) => Failure::Invalid(e.context(ctx)),
            Failure::Runtime(e) => Failure::Runtime(e.context(ctx)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } | TrainError::Io(_) => Failure::Runtime(e.into()),
            _ => Failure::Invalid(e.into()),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => Failure::Runtime(e.into()),
            _ => Failure::Invalid(e.into()),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        Failure::Invalid(e.into())
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) => Failure::Invalid(e.into()),
            GatewayError::Io(_) => Failure::Runtime(e.into()),
        }
    }
}
