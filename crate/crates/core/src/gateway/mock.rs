use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendConfig, ChatBackend, ChatExchange, GatewayError};
use crate::prompt::PromptText;

/// One scripted answer. Token counts left out of the script are
/// approximated with [`whitespace_tokens`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEntry {
    pub response: String,
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub response_tokens: Option<u64>,
    #[serde(default)]
    pub truncated: bool,
}

impl MockEntry {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
            prompt_tokens: None,
            response_tokens: None,
            truncated: false,
        }
    }
}

/// Deterministic token approximation: number of whitespace-separated words.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Replays scripted answers in order. Script consumption is serialized, so
/// a shared handle hands out each entry exactly once.
#[derive(Debug)]
pub struct MockBackend {
    script: Vec<MockEntry>,
    next: Mutex<usize>,
    cycle: bool,
}

impl MockBackend {
    pub fn new(script: Vec<MockEntry>) -> Result<Self, GatewayError> {
        if script.is_empty() {
            return Err(GatewayError::EmptyScript);
        }
        Ok(Self {
            script,
            next: Mutex::new(0),
            cycle: false,
        })
    }

    /// Like [`MockBackend::new`] but wraps around instead of running dry.
    pub fn cycling(script: Vec<MockEntry>) -> Result<Self, GatewayError> {
        let mut backend = Self::new(script)?;
        backend.cycle = true;
        Ok(backend)
    }

    pub fn from_file(path: &Path, cycle: bool) -> Result<Self, GatewayError> {
        let script = load_mock_script(path)?;
        if cycle {
            Self::cycling(script)
        } else {
            Self::new(script)
        }
    }

    pub fn calls(&self) -> usize {
        *self.next.lock().expect("mock lock")
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, prompt: &PromptText, config: &BackendConfig) -> Result<ChatExchange, GatewayError> {
        config.validate()?;
        let entry = {
            let mut next = self.next.lock().expect("mock lock");
            let idx = if self.cycle { *next % self.script.len() } else { *next };
            let entry = self.script.get(idx).ok_or(GatewayError::ScriptExhausted)?;
            *next += 1;
            entry.clone()
        };
        Ok(ChatExchange {
            prompt_tokens: entry.prompt_tokens.unwrap_or_else(|| whitespace_tokens(&prompt.text)),
            response_tokens: entry
                .response_tokens
                .unwrap_or_else(|| whitespace_tokens(&entry.response)),
            truncated: entry.truncated,
            response_text: entry.response,
        })
    }
}

pub fn parse_mock_script(text: &str) -> Result<Vec<MockEntry>, GatewayError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| GatewayError::Script(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn load_mock_script(path: &Path) -> Result<Vec<MockEntry>, GatewayError> {
    let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
    let script = parse_mock_script(&text)?;
    if script.is_empty() {
        return Err(GatewayError::EmptyScript);
    }
    Ok(script)
}
