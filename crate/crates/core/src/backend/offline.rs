use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{load_transcript, Backend, BackendError, Request, Role, TranscriptEntry};

/// Answers only requests whose digest was recorded.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let mut backend = Self::new();
        for e in entries {
            backend.insert(e.digest, e.response);
        }
        backend
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::from_entries(load_transcript(path)?))
    }

    /// Registers a response; the first recording of a digest wins.
    pub fn insert(&mut self, digest: impl Into<String>, response: impl Into<String>) {
        self.responses
            .entry(digest.into())
            .or_insert_with(|| response.into());
    }

    pub fn digests(&self) -> impl Iterator<Item = &str> {
        self.responses.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn send(&self, request: &Request<'_>) -> Result<String, BackendError> {
        self.responses
            .get(request.digest)
            .cloned()
            .ok_or_else(|| BackendError::ReplayMiss {
                digest: request.digest.to_string(),
            })
    }
}

/// Returns queued responses in call order, regardless of the request.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap().len()
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn send(&self, _: &Request<'_>) -> Result<String, BackendError> {
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(BackendError::ScriptExhausted)
    }
}

/// A response rule: fires when every `when` substring occurs in the text of
/// the last user message. Sample `i` receives `responses[i % len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub when: Vec<String>,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Config(format!(
            "cannot read mock script {}: {e}",
            path.display()
        )))?;
        serde_json::from_str(&text).map_err(|e| {
            BackendError::Config(format!("invalid mock script {}: {e}", path.display()))
        })
    }
}

/// Stateless rule-driven backend: the same request and sample always get
/// the same answer, independent of call order.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: MockScript,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, BackendError> {
        if let Some(i) = script.rules.iter().position(|r| r.responses.is_empty()) {
            return Err(BackendError::Config(format!("mock rule {i} has no responses")));
        }
        Ok(Self { script })
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn send(&self, request: &Request<'_>) -> Result<String, BackendError> {
        let text = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.text())
            .unwrap_or_default();
        let rule = self
            .script
            .rules
            .iter()
            .find(|r| r.when.iter().all(|w| text.contains(w.as_str())))
            .ok_or_else(|| BackendError::ReplayMiss {
                digest: request.digest.to_string(),
            })?;
        Ok(rule.responses[request.sample as usize % rule.responses.len()].clone())
    }
}
