use std::future::Future;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

use crate::api::{ChatRequest, ErrorBody};
use crate::config::GatewayConfig;
use crate::metrics::ErrorClass;
use crate::service::{ChatError, Gateway};
use crate::GatewayError;

fn status_of(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::BadRequest => StatusCode::BAD_REQUEST,
        ErrorClass::PromptTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
        ErrorClass::UpstreamUnavailable => StatusCode::SERVICE_UNAVAILABLE,
        ErrorClass::UpstreamProtocol => StatusCode::BAD_GATEWAY,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(class: ErrorClass, detail: String) -> Response {
    let body = ErrorBody {
        error: class.as_str().into(),
        detail,
    };
    (status_of(class), Json(body)).into_response()
}

async fn chat(State(gw): State<Arc<Gateway>>, body: Result<Json<ChatRequest>, JsonRejection>) -> Response {
    let req = match body {
        Ok(Json(req)) => req,
        Err(rejection) => {
            let class = if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ErrorClass::PromptTooLarge
            } else {
                ErrorClass::BadRequest
            };
            gw.metrics.record(std::time::Duration::ZERO, Some(class));
            tracing::info!(status = status_of(class).as_u16(), "chat rejected");
            // serde messages can quote the body, so only the kind is returned
            return error_response(class, "request body is not a valid ChatRequest".into());
        }
    };
    let (out, elapsed) = gw.handle(&req).await;
    let latency_ms = elapsed.as_millis() as u64;
    match out {
        Ok(resp) => {
            tracing::info!(status = 200, latency_ms, blocked = resp.blocked, warnings = resp.warnings.len(), "chat");
            Json(resp).into_response()
        }
        Err(e) => {
            let class = e.class();
            tracing::warn!(status = status_of(class).as_u16(), latency_ms, error = class.as_str(), "chat failed");
            let detail = match &e {
                ChatError::BadRequest(m) => m.clone(),
                other => other.to_string(),
            };
            error_response(class, detail)
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn metrics(State(gw): State<Arc<Gateway>>) -> Response {
    Json(gw.metrics.snapshot()).into_response()
}

/// `/v1/chat`, `/v1/health`, `/v1/metrics`, plus static client assets.
pub fn router(gw: Arc<Gateway>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/health", get(health))
        .route("/v1/metrics", get(metrics))
        .with_state(gw);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// A listening gateway, not yet serving.
pub struct BoundGateway {
    listener: TcpListener,
    router: Router,
    pub gateway: Arc<Gateway>,
}

impl BoundGateway {
    pub async fn bind(cfg: &GatewayConfig) -> Result<Self, GatewayError> {
        let gateway = Arc::new(Gateway::from_config(cfg)?);
        let addrs = cfg.bind_addrs()?;
        let listener = TcpListener::bind(addrs.as_slice()).await?;
        let router = router(gateway.clone(), cfg.server.static_dir.as_deref());
        Ok(BoundGateway {
            listener,
            router,
            gateway,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, GatewayError> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn serve(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), GatewayError> {
        let addr = self.local_addr()?;
        tracing::info!(%addr, "gateway listening");
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await?;
        tracing::info!("gateway stopped");
        Ok(())
    }
}
