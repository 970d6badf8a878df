mod support;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use solace_gateway::backend::RemoteBackend;
use solace_gateway::config::{BackendConfig, BackendKind};
use solace_gateway::{Backend, BackendError, Gateway, GatewayConfig, GenerateRequest, RemoteConfig};
use support::*;
use tokio::net::TcpListener;

#[derive(Clone, Copy)]
enum Behavior {
    Ok,
    AlwaysFail,
    FailOnce,
    Malformed,
    NotFound,
    Slow,
}

#[derive(Default)]
struct Upstream {
    hits: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    last: Mutex<Option<(Option<String>, Value)>>,
}

async fn predictions(
    State((behavior, up)): State<(Behavior, Arc<Upstream>)>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    let n = up.hits.fetch_add(1, Ordering::SeqCst);
    let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_owned());
    *up.last.lock().unwrap() = Some((auth, body));
    let now = up.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    up.max_in_flight.fetch_max(now, Ordering::SeqCst);
    let out = match behavior {
        Behavior::Ok => {
            tokio::time::sleep(Duration::from_millis(20)).await;
            Json(json!({ "output": "Assistant: I hear you. That sounds hard." })).into_response()
        }
        Behavior::AlwaysFail => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
        Behavior::FailOnce if n == 0 => StatusCode::SERVICE_UNAVAILABLE.into_response(),
        Behavior::FailOnce => Json(json!({ "output": "second time lucky" })).into_response(),
        Behavior::Malformed => (StatusCode::OK, "{\"result\": 1}").into_response(),
        Behavior::NotFound => StatusCode::NOT_FOUND.into_response(),
        Behavior::Slow => {
            tokio::time::sleep(Duration::from_millis(500)).await;
            Json(json!({ "output": "too late" })).into_response()
        }
    };
    up.in_flight.fetch_sub(1, Ordering::SeqCst);
    out
}

async fn upstream(behavior: Behavior) -> (String, Arc<Upstream>) {
    let up = Arc::new(Upstream::default());
    let app = Router::new()
        .route("/predictions", post(predictions))
        .with_state((behavior, up.clone()));
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (base, up)
}

fn remote_cfg(base: &str, retries: u32, timeout_ms: u64) -> RemoteConfig {
    RemoteConfig {
        base_url: base.into(),
        model: "tiny/test-model".into(),
        auth_token_env: "UNUSED".into(),
        timeout_ms,
        max_retries: retries,
        backoff_base_ms: 10,
    }
}

fn req(prompt: &str) -> GenerateRequest<'_> {
    GenerateRequest {
        prompt,
        message: "ignored by remote",
        max_tokens: 64,
    }
}

#[tokio::test]
async fn success_sends_pinned_wire_format() {
    let (base, up) = upstream(Behavior::Ok).await;
    let b = RemoteBackend::new(&remote_cfg(&base, 2, 2000), Some("s3cret".into()), 8).unwrap();
    let out = b.generate(req("User: hi\nAssistant:")).await.unwrap();
    assert_eq!(out, "Assistant: I hear you. That sounds hard.");
    let (auth, body) = up.last.lock().unwrap().clone().unwrap();
    assert_eq!(auth.as_deref(), Some("Bearer s3cret"));
    assert_eq!(
        body,
        json!({ "model": "tiny/test-model", "input": { "prompt": "User: hi\nAssistant:", "max_tokens": 64 } })
    );
    assert_eq!(b.attempts(), 1);
}

#[tokio::test]
async fn persistent_5xx_exhausts_retries() {
    let (base, up) = upstream(Behavior::AlwaysFail).await;
    let b = RemoteBackend::new(&remote_cfg(&base, 2, 2000), None, 8).unwrap();
    let start = Instant::now();
    let err = b.generate(req("p")).await.unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 3, .. }), "{err:?}");
    assert_eq!(up.hits.load(Ordering::SeqCst), 3);
    assert_eq!(b.attempts(), 3);
    assert!(start.elapsed() >= Duration::from_millis(30));
}

#[tokio::test]
async fn unreachable_upstream_is_503_after_three_attempts() {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let b = Arc::new(RemoteBackend::new(&remote_cfg(&base, 2, 500), None, 8).unwrap());
    let gw = spawn_gateway(Gateway::new(b.clone())).await;
    let c = reqwest::Client::new();
    let r = c.post(format!("{}/v1/chat", gw.base)).json(&json!({ "message": "hello" })).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 503);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["error"], "upstream_unavailable");
    assert_eq!(b.attempts(), 3);
    gw.stop().await;
}

#[tokio::test]
async fn transient_failure_recovers() {
    let (base, up) = upstream(Behavior::FailOnce).await;
    let b = RemoteBackend::new(&remote_cfg(&base, 2, 2000), None, 8).unwrap();
    assert_eq!(b.generate(req("p")).await.unwrap(), "second time lucky");
    assert_eq!(up.hits.load(Ordering::SeqCst), 2);
}

#[tokio::test]
async fn malformed_or_rejected_responses_are_502_without_retry() {
    for behavior in [Behavior::Malformed, Behavior::NotFound] {
        let (base, up) = upstream(behavior).await;
        let b = Arc::new(RemoteBackend::new(&remote_cfg(&base, 3, 2000), None, 8).unwrap());
        let gw = spawn_gateway(Gateway::new(b.clone())).await;
        let c = reqwest::Client::new();
        let r = c.post(format!("{}/v1/chat", gw.base)).json(&json!({ "message": "hello" })).send().await.unwrap();
        assert_eq!(r.status().as_u16(), 502);
        assert_eq!(up.hits.load(Ordering::SeqCst), 1);
        gw.stop().await;
    }
}

#[tokio::test]
async fn timeouts_count_as_unavailable() {
    let (base, up) = upstream(Behavior::Slow).await;
    let b = RemoteBackend::new(&remote_cfg(&base, 1, 50), None, 8).unwrap();
    let start = Instant::now();
    let err = b.generate(req("p")).await.unwrap_err();
    assert!(matches!(err, BackendError::Unavailable { attempts: 2, .. }));
    assert_eq!(up.hits.load(Ordering::SeqCst), 2);
    assert!(start.elapsed() < Duration::from_millis(450));
}

#[tokio::test]
async fn upstream_concurrency_is_bounded() {
    let (base, up) = upstream(Behavior::Ok).await;
    let b = Arc::new(RemoteBackend::new(&remote_cfg(&base, 0, 2000), None, 2).unwrap());
    let tasks: Vec<_> = (0..10)
        .map(|_| {
            let b = b.clone();
            tokio::spawn(async move { b.generate(req("p")).await })
        })
        .collect();
    for t in tasks {
        t.await.unwrap().unwrap();
    }
    assert_eq!(up.hits.load(Ordering::SeqCst), 10);
    assert!(up.max_in_flight.load(Ordering::SeqCst) <= 2);
}

#[tokio::test]
async fn configured_gateway_reads_token_from_environment() {
    let (base, up) = upstream(Behavior::Ok).await;
    std::env::set_var("SOLACE_GATEWAY_TEST_TOKEN", "from-env");
    let mut remote = remote_cfg(&base, 0, 2000);
    remote.auth_token_env = "SOLACE_GATEWAY_TEST_TOKEN".into();
    let cfg = GatewayConfig {
        backend: BackendConfig {
            kind: BackendKind::Remote,
            mock: None,
            remote: Some(remote),
        },
        ..GatewayConfig::default()
    };
    let gw = spawn(cfg).await;
    let c = reqwest::Client::new();
    let body: Value = c
        .post(format!("{}/v1/chat", gw.base))
        .json(&json!({ "message": "hello" }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(body["reply"], "I hear you. That sounds hard.");
    let (auth, sent) = up.last.lock().unwrap().clone().unwrap();
    assert_eq!(auth.as_deref(), Some("Bearer from-env"));
    let prompt = sent["input"]["prompt"].as_str().unwrap();
    assert!(prompt.starts_with("<system>") && prompt.ends_with("User: hello\nAssistant:"));
    gw.stop().await;
}
