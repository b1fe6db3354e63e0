//! Chat-completion clients: an OpenAI-compatible HTTP client, a record/replay
//! transcript store and a scripted client driven by a plain function.

mod http;
mod replay;

pub use http::{HttpClient, HttpConfig, UsageEntry, API_KEY_ENV, BASE_URL_ENV, DEFAULT_BASE_URL};
pub use replay::{request_key, ReplayClient, ReplayMode, Transcript};

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub model_name: String,
    /// Only scripted clients look at this; it is never sent over the wire.
    #[serde(default)]
    pub seed: u64,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: 0.5,
            top_p: 1.0,
            max_tokens: 2000,
            model_name: model_name.into(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub finish_reason: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

impl CompletionResult {
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: "stop".into(),
            usage: Usage::default(),
            latency_ms: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[serde(alias = "http")]
    HttpOpenaiCompatible,
    Replay,
    Scripted,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("API key missing: set {API_KEY_ENV}")]
    MissingApiKey,
    #[error("request failed after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no recorded transcript for request {key}")]
    ReplayMiss { key: String },
    #[error("transcript store: {0}")]
    Store(String),
    #[error("client refuses all calls")]
    Refused,
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError>;
    fn kind(&self) -> ClientKind;
}

type Script = dyn Fn(&str, u64) -> String + Send + Sync;

/// Answers with a deterministic function of the prompt and request seed.
pub struct ScriptedClient {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(script: impl Fn(&str, u64) -> String + Send + Sync + 'static) -> Self {
        Self {
            script: Box::new(script),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_, _| text.clone())
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(CompletionResult::from_text((self.script)(
            &request.prompt,
            request.seed,
        )))
    }

    fn kind(&self) -> ClientKind {
        ClientKind::Scripted
    }
}

/// Fails every request and counts the attempts. Stands in wherever no model
/// access is expected.
#[derive(Default)]
pub struct RefusingClient {
    calls: AtomicUsize,
}

impl RefusingClient {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for RefusingClient {
    fn complete(&self, _: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(LlmError::Refused)
    }

    fn kind(&self) -> ClientKind {
        ClientKind::Scripted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_script_ignores_prompt() {
        let c = ScriptedClient::constant("hello");
        let a = c.complete(&CompletionRequest::new("one", "m")).unwrap();
        let b = c.complete(&CompletionRequest::new("two", "m")).unwrap();
        assert_eq!(a.text, "hello");
        assert_eq!(a, b);
        assert_eq!(c.calls(), 2);
    }

    #[test]
    fn client_kind_names() {
        assert_eq!(
            serde_json::to_string(&ClientKind::HttpOpenaiCompatible).unwrap(),
            "\"http_openai_compatible\""
        );
    }
}
