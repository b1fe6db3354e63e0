use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClientKind, CompletionRequest, CompletionResult, LlmClient, LlmError};

/// Hex SHA-256 over the prompt, temperature and model name.
pub fn request_key(request: &CompletionRequest) -> String {
    let canonical = serde_json::to_string(&(
        &request.prompt,
        request.temperature,
        &request.model_name,
    ))
    .expect("tuple of strings and a float serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub request: CompletionRequest,
    pub response: CompletionResult,
    pub timestamp: u64,
}

pub enum ReplayMode {
    /// A miss is an error.
    Strict,
    /// A miss is forwarded to the inner client and the answer stored.
    Record(Arc<dyn LlmClient>),
}

/// Serves completions from a directory of `<key>.json` transcripts.
pub struct ReplayClient {
    dir: PathBuf,
    mode: ReplayMode,
}

impl ReplayClient {
    pub fn strict(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            mode: ReplayMode::Strict,
        }
    }

    pub fn recording(dir: impl Into<PathBuf>, inner: Arc<dyn LlmClient>) -> Self {
        Self {
            dir: dir.into(),
            mode: ReplayMode::Record(inner),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn load(&self, key: &str) -> Result<Option<Transcript>, LlmError> {
        let path = self.path_for(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| LlmError::Store(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(LlmError::Store(format!("{}: {e}", path.display()))),
        }
    }

    /// Writes a transcript for `request`, replacing any earlier one.
    pub fn store(&self, request: &CompletionRequest, response: &CompletionResult) -> Result<PathBuf, LlmError> {
        let key = request_key(request);
        fs::create_dir_all(&self.dir).map_err(|e| LlmError::Store(e.to_string()))?;
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let t = Transcript {
            request: request.clone(),
            response: response.clone(),
            timestamp,
        };
        let path = self.path_for(&key);
        let tmp = self.dir.join(format!(".{key}.tmp"));
        let text = serde_json::to_string_pretty(&t).map_err(|e| LlmError::Store(e.to_string()))?;
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| LlmError::Store(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let key = request_key(request);
        if let Some(t) = self.load(&key)? {
            return Ok(t.response);
        }
        match &self.mode {
            ReplayMode::Strict => Err(LlmError::ReplayMiss { key }),
            ReplayMode::Record(inner) => {
                let response = inner.complete(request)?;
                self.store(request, &response)?;
                Ok(response)
            }
        }
    }

    fn kind(&self) -> ClientKind {
        ClientKind::Replay
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedClient;

    #[test]
    fn key_depends_on_prompt_temperature_and_model_only() {
        let a = CompletionRequest::new("p", "m");
        let mut b = a.clone();
        b.seed = 5;
        b.max_tokens = 10;
        assert_eq!(request_key(&a), request_key(&b));
        b.temperature = 0.7;
        assert_ne!(request_key(&a), request_key(&b));
        let mut c = a.clone();
        c.model_name = "n".into();
        assert_ne!(request_key(&a), request_key(&c));
        assert_eq!(request_key(&a).len(), 64);
    }

    #[test]
    fn strict_miss_then_record_then_hit() {
        let dir = tempfile::tempdir().unwrap();
        let req = CompletionRequest::new("prompt", "m");
        let strict = ReplayClient::strict(dir.path());
        assert!(matches!(strict.complete(&req), Err(LlmError::ReplayMiss { .. })));

        let inner = Arc::new(ScriptedClient::constant("answer"));
        let rec = ReplayClient::recording(dir.path(), inner.clone());
        assert_eq!(rec.complete(&req).unwrap().text, "answer");
        assert_eq!(rec.complete(&req).unwrap().text, "answer");
        assert_eq!(inner.calls(), 1);

        assert_eq!(strict.complete(&req).unwrap().text, "answer");
    }
}
