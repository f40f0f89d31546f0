//! Chat-completion backends.
//!
//! [`HttpBackend`] talks to any OpenAI-compatible `/chat/completions`
//! endpoint; [`MockBackend`] replays a script of canned answers so the whole
//! pipeline can run offline.

mod http;
mod mock;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptText;

pub use http::{HttpBackend, HttpReply, ReqwestTransport, Transport, TransportFailure};
pub use mock::{load_mock_script, parse_mock_script, whitespace_tokens, MockBackend, MockEntry};

pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4-1106-preview";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("authentication failed (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("backend error (HTTP {status}): {message}")]
    Backend { status: u16, message: String },
    #[error("malformed backend reply: {0}")]
    Protocol(String),
    #[error("mock script exhausted")]
    ScriptExhausted,
    #[error("mock script is empty")]
    EmptyScript,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("cannot read mock script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_response_tokens: u32,
    #[serde(with = "secs")]
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubled on every further retry.
    #[serde(with = "secs")]
    pub retry_backoff: Duration,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            model_name: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_response_tokens: 4096,
            request_timeout: Duration::from_secs(300),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_response_tokens == 0 {
            return Err(GatewayError::Config("max_response_tokens must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn backoff_for(&self, retry: u32) -> Duration {
        self.retry_backoff.saturating_mul(1u32 << retry.min(16))
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// One prompt/response round trip, the unit of token accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt_tokens: u64,
    pub response_tokens: u64,
    pub response_text: String,
    /// The backend stopped because it hit the response length limit.
    pub truncated: bool,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError> {
        (**self).complete(prompt, config)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError> {
        (**self).complete(prompt, config)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError> {
        (**self).complete(prompt, config)
    }
}
