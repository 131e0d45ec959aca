//! Text-generation backends behind one interface.

mod deterministic;
mod remote;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::time::Instant;

pub use deterministic::render;
pub use remote::{backend_env_var, CredentialSource, RetryPolicy, API_KEY_ENV};

use remote::RemoteChat;

/// Id of the built-in offline backend, always available.
pub const DETERMINISTIC_ID: &str = "deterministic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteChat,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_max_retries() -> u32 {
    2
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_in_flight() -> usize {
    4
}

impl BackendConfig {
    pub fn remote(backend_id: &str, endpoint_url: &str, model_name: &str) -> Self {
        Self {
            backend_id: backend_id.into(),
            kind: BackendKind::RemoteChat,
            endpoint_url: Some(endpoint_url.into()),
            model_name: Some(model_name.into()),
            timeout_ms: default_timeout_ms(),
            max_retries: default_max_retries(),
            temperature: default_temperature(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn deterministic(backend_id: &str) -> Self {
        Self {
            kind: BackendKind::Deterministic,
            endpoint_url: None,
            model_name: None,
            ..Self::remote(backend_id, "", "")
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(format!("{}: {m}", self.backend_id)));
        if self.backend_id.trim().is_empty() {
            return Err(GatewayError::InvalidConfig("backend_id must be non-empty".into()));
        }
        if self.kind == BackendKind::RemoteChat {
            if self.endpoint_url.as_deref().is_none_or(str::is_empty) {
                return bad("remote_chat requires endpoint_url");
            }
            if self.model_name.as_deref().is_none_or(str::is_empty) {
                return bad("remote_chat requires model_name");
            }
        }
        if self.timeout_ms < 1 {
            return bad("timeout_ms must be >= 1");
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return bad("temperature must be a non-negative number");
        }
        if self.max_in_flight < 1 {
            return bad("max_in_flight must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("generation timed out")]
    Timeout,
    #[error("backend returned HTTP {status}: {excerpt}")]
    Http { status: u16, excerpt: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("missing credential: set {0} or {API_KEY_ENV}")]
    MissingCredential(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unknown backend '{id}'; available: {}", available.join(", "))]
    UnknownBackend { id: String, available: Vec<String> },
    #[error("duplicate backend id '{0}'")]
    DuplicateId(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("prompt is empty")]
    EmptyPrompt,
}

impl GatewayError {
    /// Timeouts, transport faults and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Timeout | GatewayError::Transport(_) => true,
            GatewayError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub latency_ms: u64,
}

#[derive(Debug)]
enum Backend {
    Deterministic,
    Remote(Box<RemoteChat>),
}

/// Configured backends plus the built-in deterministic one, listed first.
#[derive(Debug)]
pub struct Gateway {
    entries: Vec<(BackendDescriptor, Backend)>,
}

impl Gateway {
    /// Credentials come from the environment; backoff starts at 250 ms.
    pub fn from_configs(configs: &[BackendConfig]) -> Result<Self, GatewayError> {
        Self::with_options(configs, CredentialSource::Env, RetryPolicy::DEFAULT_BASE_DELAY)
    }

    pub fn with_options(
        configs: &[BackendConfig],
        credentials: CredentialSource,
        base_delay: Duration,
    ) -> Result<Self, GatewayError> {
        let mut entries = vec![(
            BackendDescriptor {
                backend_id: DETERMINISTIC_ID.into(),
                kind: BackendKind::Deterministic,
                model_name: None,
            },
            Backend::Deterministic,
        )];
        for config in configs {
            config.validate()?;
            if entries.iter().any(|(d, _)| d.backend_id == config.backend_id) {
                return Err(GatewayError::DuplicateId(config.backend_id.clone()));
            }
            let descriptor = BackendDescriptor {
                backend_id: config.backend_id.clone(),
                kind: config.kind,
                model_name: config.model_name.clone(),
            };
            let backend = match config.kind {
                BackendKind::Deterministic => Backend::Deterministic,
                BackendKind::RemoteChat => {
                    Backend::Remote(Box::new(RemoteChat::new(config.clone(), credentials.clone(), base_delay)?))
                }
            };
            entries.push((descriptor, backend));
        }
        Ok(Self { entries })
    }

    pub fn list_backends(&self) -> Vec<BackendDescriptor> {
        self.entries.iter().map(|(d, _)| d.clone()).collect()
    }

    fn lookup(&self, backend_id: &str) -> Result<&(BackendDescriptor, Backend), GatewayError> {
        self.entries.iter().find(|(d, _)| d.backend_id == backend_id).ok_or_else(|| GatewayError::UnknownBackend {
            id: backend_id.into(),
            available: self.entries.iter().map(|(d, _)| d.backend_id.clone()).collect(),
        })
    }

    pub fn descriptor(&self, backend_id: &str) -> Result<&BackendDescriptor, GatewayError> {
        self.lookup(backend_id).map(|(d, _)| d)
    }

    /// Generate text for `prompt`. The deterministic backend reports zero latency
    /// so its results are reproducible byte for byte.
    pub async fn generate(
        &self,
        backend_id: &str,
        prompt: &str,
        deadline: Instant,
    ) -> Result<Generation, GatewayError> {
        let (_, backend) = self.lookup(backend_id)?;
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        match backend {
            Backend::Deterministic => Ok(Generation { text: render(prompt), latency_ms: 0 }),
            Backend::Remote(remote) => {
                let start = Instant::now();
                let text = remote.generate(prompt, deadline).await?;
                Ok(Generation { text, latency_ms: start.elapsed().as_millis() as u64 })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn remote(id: &str) -> BackendConfig {
        BackendConfig::remote(id, "http://127.0.0.1:9/v1/chat/completions", "m")
    }

    #[test]
    fn empty_config_lists_only_deterministic() {
        let g = Gateway::from_configs(&[]).unwrap();
        let ids: Vec<_> = g.list_backends().into_iter().map(|d| d.backend_id).collect();
        assert_eq!(ids, [DETERMINISTIC_ID]);
    }

    #[test]
    fn four_remotes_give_five_descriptors() {
        let cfgs: Vec<_> =
            ["gpt-4", "gpt-3.5-turbo", "flan-t5-large", "flan-t5-xl"].iter().map(|id| remote(id)).collect();
        let g = Gateway::from_configs(&cfgs).unwrap();
        let list = g.list_backends();
        assert_eq!(list.len(), 5);
        assert_eq!(list[0].kind, BackendKind::Deterministic);
        assert_eq!(list[4].backend_id, "flan-t5-xl");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Gateway::from_configs(&[remote("a"), remote("a")]).unwrap_err();
        assert_eq!(err, GatewayError::DuplicateId("a".into()));
        let err = Gateway::from_configs(&[BackendConfig::deterministic(DETERMINISTIC_ID)]).unwrap_err();
        assert!(matches!(err, GatewayError::DuplicateId(_)));
    }

    #[test]
    fn remote_requires_endpoint_and_model() {
        let mut c = remote("x");
        c.model_name = None;
        assert!(matches!(Gateway::from_configs(&[c]), Err(GatewayError::InvalidConfig(_))));
        let mut c = remote("x");
        c.timeout_ms = 0;
        assert!(matches!(Gateway::from_configs(&[c]), Err(GatewayError::InvalidConfig(_))));
    }

    #[test]
    fn config_defaults_from_toml_like_json() {
        let c: BackendConfig =
            serde_json::from_str(r#"{"backend_id":"g","kind":"remote_chat","endpoint_url":"u","model_name":"m"}"#)
                .unwrap();
        assert_eq!(c.temperature, 0.7);
        assert_eq!(c.max_in_flight, 4);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn retryable_classification() {
        assert!(GatewayError::Timeout.is_retryable());
        assert!(GatewayError::Http { status: 503, excerpt: String::new() }.is_retryable());
        assert!(!GatewayError::Http { status: 404, excerpt: String::new() }.is_retryable());
        assert!(!GatewayError::MalformedResponse(String::new()).is_retryable());
    }

    #[tokio::test]
    async fn unknown_backend_names_available() {
        let g = Gateway::from_configs(&[]).unwrap();
        let err = g.generate("nope", "x", Instant::now() + Duration::from_secs(1)).await.unwrap_err();
        assert!(err.to_string().contains("available: deterministic"));
    }

    #[tokio::test]
    async fn deterministic_is_pure() {
        let g = Gateway::from_configs(&[]).unwrap();
        let d = Instant::now() + Duration::from_secs(1);
        let a = g.generate(DETERMINISTIC_ID, "hello", d).await.unwrap();
        let b = g.generate(DETERMINISTIC_ID, "hello", d).await.unwrap();
        assert_eq!(a, b);
        assert_eq!(a.latency_ms, 0);
        assert_eq!(g.generate(DETERMINISTIC_ID, "  ", d).await, Err(GatewayError::EmptyPrompt));
    }
}
