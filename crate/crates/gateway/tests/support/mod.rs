#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use solace_gateway::{router, BoundGateway, Gateway, GatewayConfig};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct Running {
    pub base: String,
    pub gateway: Arc<Gateway>,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl Running {
    pub async fn stop(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        (&mut self.task).await.unwrap();
    }
}

/// Serves `cfg` on an ephemeral loopback port.
pub async fn spawn(mut cfg: GatewayConfig) -> Running {
    cfg.server.bind = "127.0.0.1:0".into();
    let bound = BoundGateway::bind(&cfg).await.unwrap();
    let base = format!("http://{}", bound.local_addr().unwrap());
    let gateway = bound.gateway.clone();
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(async move {
        bound
            .serve(async {
                let _ = rx.await;
            })
            .await
            .unwrap();
    });
    Running {
        base,
        gateway,
        stop: Some(tx),
        task,
    }
}

/// Serves an already-built gateway, for custom backends.
pub async fn spawn_gateway(gateway: Gateway) -> Running {
    let gateway = Arc::new(gateway);
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(gateway.clone(), None);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
            .unwrap();
    });
    Running {
        base,
        gateway,
        stop: Some(tx),
        task,
    }
}

pub fn canned_config() -> GatewayConfig {
    GatewayConfig::load(&fixtures().join("gateway.json")).unwrap()
}

pub fn echo_config() -> GatewayConfig {
    GatewayConfig::default()
}
