use std::time::Duration;

use log::{debug, warn};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{BackendConfig, ChatBackend, ChatExchange, GatewayError};
use crate::prompt::PromptText;

/// Raw HTTP reply: status code plus body text.
#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// A request that never produced an HTTP status (connect, DNS, timeout).
#[derive(Debug, Clone)]
pub struct TransportFailure(pub String);

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure>;
}

#[derive(Debug, Default)]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        api_key: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportFailure(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportFailure(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// OpenAI-compatible chat-completions client with retry on transient errors.
pub struct HttpBackend<T = ReqwestTransport> {
    transport: T,
    api_key: Option<String>,
}

impl HttpBackend<ReqwestTransport> {
    /// Reads the API key from [`super::API_KEY_ENV`] if set.
    pub fn from_env() -> Self {
        Self::new(ReqwestTransport::default(), std::env::var(super::API_KEY_ENV).ok())
    }
}

impl<T: Transport> HttpBackend<T> {
    pub fn new(transport: T, api_key: Option<String>) -> Self {
        Self { transport, api_key }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

pub(crate) fn request_body(prompt: &PromptText, config: &BackendConfig) -> Value {
    json!({
        "model": config.model_name,
        "messages": [{ "role": "user", "content": prompt.text }],
        "temperature": config.temperature,
        "max_tokens": config.max_response_tokens,
    })
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v.pointer("/error/message").and_then(Value::as_str).map(str::to_owned))
        .unwrap_or_else(|| body.chars().take(500).collect())
}

pub(crate) fn decode_success(body: &str) -> Result<ChatExchange, GatewayError> {
    let parsed: CompletionBody = serde_json::from_str(body).map_err(|e| GatewayError::Protocol(e.to_string()))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Protocol("reply has no choices".into()))?;
    let usage = parsed
        .usage
        .ok_or_else(|| GatewayError::Protocol("reply has no usage block".into()))?;
    Ok(ChatExchange {
        prompt_tokens: usage.prompt_tokens,
        response_tokens: usage.completion_tokens,
        response_text: choice.message.content.unwrap_or_default(),
        truncated: choice.finish_reason.as_deref() == Some("length"),
    })
}

enum Attempt {
    Done(Result<ChatExchange, GatewayError>),
    Retry(String),
}

fn classify(outcome: Result<HttpReply, TransportFailure>) -> Attempt {
    match outcome {
        Err(TransportFailure(msg)) => Attempt::Retry(msg),
        Ok(HttpReply { status, body }) => match status {
            200..=299 => Attempt::Done(decode_success(&body)),
            401 | 403 => Attempt::Done(Err(GatewayError::Auth {
                status,
                message: error_message(&body),
            })),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {}", error_message(&body))),
            _ => Attempt::Done(Err(GatewayError::Backend {
                status,
                message: error_message(&body),
            })),
        },
    }
}

impl<T: Transport> ChatBackend for HttpBackend<T> {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError> {
        config.validate()?;
        let body = request_body(prompt, config);
        let attempts = config.max_retries.saturating_add(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = config.backoff_for(attempt - 1);
                debug!("retrying chat request in {wait:?} (attempt {})", attempt + 1);
                std::thread::sleep(wait);
            }
            let outcome =
                self.transport
                    .post_json(&config.endpoint, self.api_key.as_deref(), &body, config.request_timeout);
            match classify(outcome) {
                Attempt::Done(result) => return result,
                Attempt::Retry(msg) => {
                    warn!("chat request attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(GatewayError::Network {
            attempts,
            message: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::prompt::PromptVariant;

    struct Scripted {
        replies: Mutex<Vec<Result<HttpReply, TransportFailure>>>,
        calls: Mutex<Vec<Value>>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpReply, TransportFailure>>) -> Self {
            replies.reverse();
            Self {
                replies: Mutex::new(replies),
                calls: Mutex::new(Vec::new()),
            }
        }

        fn calls(&self) -> usize {
            self.calls.lock().unwrap().len()
        }
    }

    impl Transport for Scripted {
        fn post_json(
            &self,
            _url: &str,
            _api_key: Option<&str>,
            body: &Value,
            _timeout: Duration,
        ) -> Result<HttpReply, TransportFailure> {
            self.calls.lock().unwrap().push(body.clone());
            self.replies.lock().unwrap().pop().expect("unexpected call")
        }
    }

    fn ok(content: &str, finish: &str) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: 200,
            body: json!({
                "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}],
                "usage": {"prompt_tokens": 800, "completion_tokens": 135, "total_tokens": 935}
            })
            .to_string(),
        })
    }

    fn prompt() -> PromptText {
        PromptText {
            text: "Report 1: x\n  trailing  ".into(),
            report_count: 1,
            variant: PromptVariant::Cluster,
        }
    }

    fn fast_config(max_retries: u32) -> BackendConfig {
        BackendConfig {
            max_retries,
            retry_backoff: Duration::from_millis(1),
            ..BackendConfig::default()
        }
    }

    #[test]
    fn succeeds_after_two_transport_failures() {
        let backend = HttpBackend::new(
            Scripted::new(vec![
                Err(TransportFailure("reset".into())),
                Err(TransportFailure("reset".into())),
                ok("LEVEL 1: A -> Report: 1", "stop"),
            ]),
            None,
        );
        let ex = backend.complete(&prompt(), &fast_config(3)).unwrap();
        assert_eq!(backend.transport().calls(), 3);
        assert_eq!(ex.prompt_tokens, 800);
        assert_eq!(ex.response_tokens, 135);
        assert!(!ex.truncated);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let backend = HttpBackend::new(
            Scripted::new(vec![
                Err(TransportFailure("a".into())),
                Ok(HttpReply {
                    status: 503,
                    body: "busy".into(),
                }),
            ]),
            None,
        );
        let err = backend.complete(&prompt(), &fast_config(1)).unwrap_err();
        assert!(matches!(err, GatewayError::Network { attempts: 2, .. }), "{err}");
    }

    #[test]
    fn length_finish_marks_truncation_without_retry() {
        let backend = HttpBackend::new(Scripted::new(vec![ok("1. Report", "length")]), None);
        let ex = backend.complete(&prompt(), &fast_config(3)).unwrap();
        assert!(ex.truncated);
        assert_eq!(backend.transport().calls(), 1);
    }

    #[test]
    fn auth_and_payload_errors_are_distinct() {
        let backend = HttpBackend::new(
            Scripted::new(vec![Ok(HttpReply {
                status: 401,
                body: r#"{"error":{"message":"bad key"}}"#.into(),
            })]),
            Some("k".into()),
        );
        let err = backend.complete(&prompt(), &fast_config(3)).unwrap_err();
        assert!(matches!(err, GatewayError::Auth { status: 401, ref message } if message == "bad key"));

        let backend = HttpBackend::new(
            Scripted::new(vec![Ok(HttpReply {
                status: 400,
                body: "nope".into(),
            })]),
            None,
        );
        let err = backend.complete(&prompt(), &fast_config(3)).unwrap_err();
        assert!(matches!(err, GatewayError::Backend { status: 400, .. }));

        let backend = HttpBackend::new(
            Scripted::new(vec![Ok(HttpReply {
                status: 200,
                body: "{}".into(),
            })]),
            None,
        );
        assert!(matches!(
            backend.complete(&prompt(), &fast_config(0)),
            Err(GatewayError::Protocol(_))
        ));
    }

    #[test]
    fn request_passes_prompt_verbatim() {
        let backend = HttpBackend::new(Scripted::new(vec![ok("x", "stop")]), None);
        let config = fast_config(0);
        backend.complete(&prompt(), &config).unwrap();
        let sent = backend.transport().calls.lock().unwrap()[0].clone();
        assert_eq!(sent["messages"][0]["content"], prompt().text);
        assert_eq!(sent["messages"].as_array().unwrap().len(), 1);
        assert_eq!(sent["messages"][0]["role"], "user");
        assert_eq!(sent["temperature"], 0.0);
        assert_eq!(sent["max_tokens"], 4096);
        assert_eq!(sent["model"], config.model_name);
    }
}
