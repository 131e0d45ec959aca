//! Chat-completion client with bounded retries and exponential backoff.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;
use tokio::time::Instant;
use tracing::warn;

use super::{BackendConfig, GatewayError};

pub const API_KEY_ENV: &str = "MEALMIND_LLM_API_KEY";

/// Where the bearer token comes from.
#[derive(Clone)]
pub enum CredentialSource {
    /// `MEALMIND_LLM_API_KEY_<BACKEND_ID>`, falling back to `MEALMIND_LLM_API_KEY`.
    Env,
    Fixed(String),
}

impl std::fmt::Debug for CredentialSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CredentialSource::Env => f.write_str("Env"),
            CredentialSource::Fixed(_) => f.write_str("Fixed(***)"),
        }
    }
}

pub fn backend_env_var(backend_id: &str) -> String {
    let suffix: String =
        backend_id.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect();
    format!("{API_KEY_ENV}_{suffix}")
}

impl CredentialSource {
    fn resolve(&self, backend_id: &str) -> Result<String, GatewayError> {
        match self {
            CredentialSource::Fixed(k) => Ok(k.clone()),
            CredentialSource::Env => {
                let specific = backend_env_var(backend_id);
                std::env::var(&specific)
                    .or_else(|_| std::env::var(API_KEY_ENV))
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or(GatewayError::MissingCredential(specific))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    pub const DEFAULT_BASE_DELAY: Duration = Duration::from_millis(250);

    /// Delay before re-attempt `n` (1-based): `base * 2^(n-1)`.
    pub fn delay(&self, n: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << (n - 1).min(20))
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Debug)]
pub struct RemoteChat {
    config: BackendConfig,
    endpoint: String,
    model: String,
    client: reqwest::Client,
    credentials: CredentialSource,
    retry: RetryPolicy,
    in_flight: Semaphore,
}

const EXCERPT_LEN: usize = 200;

fn excerpt(body: &str, secret: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_LEN).collect();
    if !secret.is_empty() {
        s = s.replace(secret, "***");
    }
    s
}

impl RemoteChat {
    pub fn new(
        config: BackendConfig,
        credentials: CredentialSource,
        base_delay: Duration,
    ) -> Result<Self, GatewayError> {
        let endpoint = config
            .endpoint_url
            .clone()
            .ok_or_else(|| GatewayError::InvalidConfig(format!("{}: endpoint_url required", config.backend_id)))?;
        let model = config
            .model_name
            .clone()
            .ok_or_else(|| GatewayError::InvalidConfig(format!("{}: model_name required", config.backend_id)))?;
        let client = reqwest::Client::builder().build().map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            retry: RetryPolicy { max_retries: config.max_retries, base_delay },
            in_flight: Semaphore::new(config.max_in_flight.max(1)),
            endpoint,
            model,
            client,
            credentials,
            config,
        })
    }

    async fn attempt(&self, key: &str, prompt: &str, timeout: Duration) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let send = self.client.post(&self.endpoint).bearer_auth(key).json(&body).timeout(timeout).send();
        let resp = match send.await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Err(GatewayError::Timeout),
            Err(e) => return Err(GatewayError::Transport(excerpt(&e.without_url().to_string(), key))),
        };
        let status = resp.status();
        let text = match tokio::time::timeout(timeout, resp.text()).await {
            Err(_) => return Err(GatewayError::Timeout),
            Ok(Err(e)) if e.is_timeout() => return Err(GatewayError::Timeout),
            Ok(Err(e)) => return Err(GatewayError::Transport(excerpt(&e.without_url().to_string(), key))),
            Ok(Ok(t)) => t,
        };
        if !status.is_success() {
            return Err(GatewayError::Http { status: status.as_u16(), excerpt: excerpt(&text, key) });
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::MalformedResponse(format!("{e}: {}", excerpt(&text, key))))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::MalformedResponse("no choices[0].message.content".into()))
    }

    /// Send the prompt, retrying timeouts, transport faults and 5xx responses
    /// `max_retries` times with exponential backoff. 4xx responses are final.
    pub async fn generate(&self, prompt: &str, deadline: Instant) -> Result<String, GatewayError> {
        let key = self.credentials.resolve(&self.config.backend_id)?;
        let _permit = self.in_flight.acquire().await.expect("semaphore never closed");
        let per_attempt = Duration::from_millis(self.config.timeout_ms.max(1));

        let mut retries = 0;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(GatewayError::Timeout);
            }
            let err = match self.attempt(&key, prompt, per_attempt.min(remaining)).await {
                Ok(text) => return Ok(text),
                Err(e) if !e.is_retryable() => return Err(e),
                Err(e) => e,
            };
            if retries >= self.retry.max_retries {
                return Err(err);
            }
            retries += 1;
            let delay = self.retry.delay(retries);
            if Instant::now() + delay >= deadline {
                return Err(err);
            }
            warn!(backend = %self.config.backend_id, attempt = retries, ?delay, error = %err, "generation failed; retrying");
            tokio::time::sleep(delay).await;
        }
    }
}
