//! Stateless chat gateway: request validation, safety screening in both
//! directions, prompt rendering, a pluggable generation backend and reply
//! post-processing, with no durable record of any message.

pub mod api;
pub mod backend;
pub mod config;
pub mod http;
pub mod metrics;
pub mod postprocess;
pub mod prompt;
pub mod safety;
pub mod service;

pub use api::{ChatRequest, ChatResponse, Role, Turn, DISCLOSURE};
pub use backend::{Backend, BackendError, GenerateRequest, MockBackend, MockConfig, RemoteBackend, RemoteConfig};
pub use config::GatewayConfig;
pub use http::{router, BoundGateway};
pub use metrics::MetricsSnapshot;
pub use service::{ChatError, Gateway};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
