use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};

use super::{ClientKind, CompletionRequest, CompletionResult, LlmClient, LlmError, Usage};

pub const API_KEY_ENV: &str = "FEATLING_API_KEY";
pub const BASE_URL_ENV: &str = "FEATLING_BASE_URL";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Clone, Debug)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_factor: f64,
    pub max_concurrent: usize,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            max_attempts: 5,
            backoff_base: Duration::from_secs(1),
            backoff_factor: 2.0,
            max_concurrent: 4,
        }
    }

    /// Key from `FEATLING_API_KEY`; base URL from `base_url`, else
    /// `FEATLING_BASE_URL`, else the public OpenAI endpoint.
    pub fn from_env(base_url: Option<&str>) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(LlmError::MissingApiKey)?;
        let base = base_url
            .map(str::to_owned)
            .or_else(|| std::env::var(BASE_URL_ENV).ok().filter(|u| !u.is_empty()))
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_owned());
        Ok(Self::new(base, key))
    }

    fn delay(&self, retry: u32) -> Duration {
        self.backoff_base.mul_f64(self.backoff_factor.powi(retry as i32))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UsageEntry {
    pub attempts: u32,
    pub status: u16,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self, cap: usize) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= cap.max(1) {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpClient {
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
    log: Mutex<Vec<UsageEntry>>,
}

enum Attempt {
    Done(CompletionResult, u16),
    Retry(String),
    Fatal(LlmError),
}

impl HttpClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            agent,
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
            },
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn usage_log(&self) -> Vec<UsageEntry> {
        self.log.lock().unwrap().clone()
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let sent = self
            .agent
            .post(&self.endpoint())
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body);
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("status {status}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fatal(LlmError::Status { status, body: text });
        }
        match parse_chat_response(&text) {
            Ok(r) => Attempt::Done(r, status),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

fn parse_chat_response(text: &str) -> Result<CompletionResult, LlmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LlmError::Malformed(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
    let content = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Malformed("no message content".into()))?;
    let count = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(CompletionResult {
        text: content.to_owned(),
        finish_reason: choice
            .get("finish_reason")
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_owned(),
        usage: Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
        latency_ms: 0,
    })
}

impl LlmClient for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let body = json!({
            "model": request.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        });
        let _permit = self.gate.acquire(self.config.max_concurrent);
        let start = Instant::now();
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts.max(1) {
            match self.attempt(&body) {
                Attempt::Done(mut result, status) => {
                    result.latency_ms = start.elapsed().as_millis() as u64;
                    self.log.lock().unwrap().push(UsageEntry {
                        attempts: attempt,
                        status,
                        prompt_tokens: result.usage.prompt_tokens,
                        completion_tokens: result.usage.completion_tokens,
                        latency_ms: result.latency_ms,
                    });
                    return Ok(result);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => {
                    log::warn!("attempt {attempt} failed: {why}");
                    last = why;
                    if attempt < self.config.max_attempts {
                        std::thread::sleep(self.config.delay(attempt - 1));
                    }
                }
            }
        }
        Err(LlmError::Network {
            attempts: self.config.max_attempts,
            message: last,
        })
    }

    fn kind(&self) -> ClientKind {
        ClientKind::HttpOpenaiCompatible
    }
}
