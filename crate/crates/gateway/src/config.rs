use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::{MockConfig, RemoteConfig};
use crate::prompt::PromptTemplate;
use crate::GatewayError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub insecure_override: bool,
    /// Directory of static client assets served at `/`.
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: default_bind(),
            insecure_override: false,
            static_dir: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub mock: Option<MockConfig>,
    #[serde(default)]
    pub remote: Option<RemoteConfig>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            mock: Some(MockConfig::echo()),
            remote: None,
        }
    }
}

/// Lexicon paths; the bundled lists are used for any path left out.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyConfig {
    #[serde(default)]
    pub blocklist_path: Option<PathBuf>,
    #[serde(default)]
    pub trigger_lexicon_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    /// Rendered prompt cap in characters.
    #[serde(default = "default_prompt_cap")]
    pub prompt_cap: usize,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_upstream: usize,
}

fn default_prompt_cap() -> usize {
    8000
}

fn default_concurrency() -> usize {
    8
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig {
            prompt_cap: default_prompt_cap(),
            max_concurrent_upstream: default_concurrency(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewayConfig {
    #[serde(default)]
    pub server: ServerConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub template: PromptTemplate,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl GatewayConfig {
    /// Reads the JSON file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: GatewayConfig = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.safety.blocklist_path);
        resolve(base, &mut cfg.safety.trigger_lexicon_path);
        resolve(base, &mut cfg.server.static_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Config(m.into()));
        match self.backend.kind {
            BackendKind::Mock if self.backend.mock.is_none() => return bad("backend.kind is mock but backend.mock is missing"),
            BackendKind::Remote if self.backend.remote.is_none() => {
                return bad("backend.kind is remote but backend.remote is missing")
            }
            _ => {}
        }
        if let Some(r) = &self.backend.remote {
            if r.base_url.trim().is_empty() || r.model.trim().is_empty() || r.auth_token_env.trim().is_empty() {
                return bad("backend.remote needs base_url, model and auth_token_env");
            }
            if r.timeout_ms == 0 {
                return bad("backend.remote.timeout_ms must be positive");
            }
        }
        if self.limits.prompt_cap == 0 {
            return bad("limits.prompt_cap must be positive");
        }
        if self.limits.max_concurrent_upstream == 0 {
            return bad("limits.max_concurrent_upstream must be positive");
        }
        self.bind_addrs()?;
        Ok(())
    }

    /// Resolved bind addresses; anything but loopback needs the override.
    pub fn bind_addrs(&self) -> Result<Vec<SocketAddr>, GatewayError> {
        let addrs: Vec<SocketAddr> = self
            .server
            .bind
            .to_socket_addrs()
            .map_err(|e| GatewayError::Config(format!("bind address {:?}: {e}", self.server.bind)))?
            .collect();
        if addrs.is_empty() {
            return Err(GatewayError::Config(format!("bind address {:?} resolves to nothing", self.server.bind)));
        }
        if !self.server.insecure_override && addrs.iter().any(|a| !a.ip().is_loopback()) {
            return Err(GatewayError::Config(format!(
                "refusing to bind non-loopback address {:?}; terminate TLS in front and set \
                 server.insecure_override to allow it",
                self.server.bind
            )));
        }
        Ok(addrs)
    }
}
