//! Model backends behind one chat-completion interface.
//!
//! [`VlmClient`] is the entry point: it checks the conversation, derives the
//! request digest, bounds concurrent calls, retries transport failures and
//! appends every exchange to an optional [`TranscriptLog`]. Backends only
//! turn a [`Request`] into response text:
//!
//! * [`LiveBackend`] speaks the HTTP chat-completion wire format.
//! * [`ReplayBackend`] answers from recorded exchanges keyed by digest.
//! * [`MockBackend`] answers from substring rules, for fixture corpora.
//! * [`ScriptedBackend`] pops queued responses in call order, for tests.

mod live;
mod message;
mod offline;
mod transcript;

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use live::{LiveBackend, LiveConfig};
pub use message::{serialize_series, Message, NonFiniteSeries, Part, Role, FORCE_LABEL};
pub use offline::{MockBackend, MockRule, MockScript, ReplayBackend, ScriptedBackend};
pub use transcript::{load_transcript, TranscriptEntry, TranscriptLog};

/// Decoding settings; part of every request digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingSettings {
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

fn default_temperature() -> f64 {
    1.0
}

impl Default for DecodingSettings {
    fn default() -> Self {
        Self {
            model: "gpt-4o".to_string(),
            temperature: default_temperature(),
            max_tokens: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid conversation: {0}")]
    Precondition(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend refused the request: {0}")]
    Refusal(String),
    #[error("no recorded response for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: String, message: String },
}

impl BackendError {
    /// Only transport faults are retried; refusals and misses are results.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

/// One request as seen by a backend.
#[derive(Debug, Clone, Copy)]
pub struct Request<'a> {
    pub messages: &'a [Message],
    pub settings: &'a DecodingSettings,
    /// Draw index; repeated trials of one conversation use distinct samples.
    pub sample: u32,
    pub digest: &'a str,
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn send(&self, request: &Request<'_>) -> Result<String, BackendError>;
}

#[derive(Serialize)]
struct DigestInput<'a> {
    settings: &'a DecodingSettings,
    sample: u32,
    messages: Vec<DigestMessage>,
}

#[derive(Serialize)]
struct DigestMessage {
    role: Role,
    parts: Vec<DigestPart>,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum DigestPart {
    Text(String),
    Image { uri: String, sha256: Option<String> },
}

/// SHA-256 over a canonical JSON form of the request. Data parts hash by
/// their rendered text so the digest only depends on what is sent.
pub fn request_digest(settings: &DecodingSettings, sample: u32, messages: &[Message]) -> String {
    let input = DigestInput {
        settings,
        sample,
        messages: messages
            .iter()
            .map(|m| DigestMessage {
                role: m.role,
                parts: m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Image { uri, sha256, .. } => DigestPart::Image {
                            uri: uri.clone(),
                            sha256: sha256.clone(),
                        },
                        other => DigestPart::Text(other.render()),
                    })
                    .collect(),
            })
            .collect(),
    };
    let bytes = serde_json::to_vec(&input).expect("digest input serializes");
    hex::encode(Sha256::digest(bytes))
}

/// Response text plus the digest of the request that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Limiter {
    fn acquire(&self) -> LimiterGuard<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Shared handle used by the orchestrator for every model query.
pub struct VlmClient {
    backend: Arc<dyn Backend>,
    settings: DecodingSettings,
    transcript: Option<Arc<TranscriptLog>>,
    options: ClientOptions,
    limiter: Arc<Limiter>,
}

impl VlmClient {
    pub fn new(backend: Arc<dyn Backend>, settings: DecodingSettings) -> Self {
        Self::with_options(backend, settings, ClientOptions::default())
    }

    pub fn with_options(
        backend: Arc<dyn Backend>,
        settings: DecodingSettings,
        options: ClientOptions,
    ) -> Self {
        let max = options.max_in_flight.max(1);
        Self {
            backend,
            settings,
            transcript: None,
            options,
            limiter: Arc::new(Limiter {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                max,
            }),
        }
    }

    /// A client for `backend` sharing this client's settings, transcript and
    /// in-flight limit.
    pub fn with_backend(&self, backend: Arc<dyn Backend>) -> Self {
        Self {
            backend,
            settings: self.settings.clone(),
            transcript: self.transcript.clone(),
            options: self.options.clone(),
            limiter: Arc::clone(&self.limiter),
        }
    }

    /// Records every successful exchange to `log`.
    pub fn with_transcript(mut self, log: Arc<TranscriptLog>) -> Self {
        self.transcript = Some(log);
        self
    }

    pub fn settings(&self) -> &DecodingSettings {
        &self.settings
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn transcript(&self) -> Option<&Arc<TranscriptLog>> {
        self.transcript.as_ref()
    }

    pub fn complete(&self, conversation: &[Message]) -> Result<Completion, BackendError> {
        self.complete_sample(conversation, 0)
    }

    pub fn complete_sample(
        &self,
        conversation: &[Message],
        sample: u32,
    ) -> Result<Completion, BackendError> {
        check_conversation(conversation)?;
        let digest = request_digest(&self.settings, sample, conversation);
        let request = Request {
            messages: conversation,
            settings: &self.settings,
            sample,
            digest: &digest,
        };

        let _slot = self.limiter.acquire();
        let started = chrono::Utc::now();
        let mut attempt = 0;
        let text = loop {
            attempt += 1;
            match self.backend.send(&request) {
                Ok(text) => break text,
                Err(e) if e.is_retryable() && attempt <= self.options.max_retries => {
                    let backoff = self.options.initial_backoff * 2u32.pow(attempt - 1);
                    log::warn!("{}: {e}; retrying in {backoff:?}", self.backend.name());
                    thread::sleep(backoff);
                }
                Err(BackendError::Transport { message, .. }) => {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(log) = &self.transcript {
            log.append(TranscriptEntry {
                digest: digest.clone(),
                backend: self.backend.name().to_string(),
                settings: self.settings.clone(),
                sample,
                request: conversation.to_vec(),
                response: text.clone(),
                started_at: started,
                finished_at: chrono::Utc::now(),
            })?;
        }
        Ok(Completion { text, digest })
    }
}

fn check_conversation(conversation: &[Message]) -> Result<(), BackendError> {
    if conversation.is_empty() {
        return Err(BackendError::Precondition("conversation is empty".into()));
    }
    if !conversation.iter().any(|m| m.role == Role::User) {
        return Err(BackendError::Precondition(
            "conversation has no user message".into(),
        ));
    }
    for (i, m) in conversation.iter().enumerate() {
        if m.parts.is_empty() {
            return Err(BackendError::Precondition(format!("message {i} has no parts")));
        }
        for p in &m.parts {
            if let Part::Series { label, values } = p {
                serialize_series(label, values)
                    .map_err(|e| BackendError::Precondition(format!("message {i}: {e}")))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: AtomicU32,
        calls: AtomicU32,
        refuse: bool,
    }

    impl Backend for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }

        fn send(&self, _: &Request<'_>) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.refuse {
                return Err(BackendError::Refusal("no".into()));
            }
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(BackendError::Transport {
                    attempts: 1,
                    message: "reset".into(),
                });
            }
            Ok("ok".into())
        }
    }

    fn client(failures: u32, refuse: bool) -> (Arc<Flaky>, VlmClient) {
        let backend = Arc::new(Flaky {
            failures: AtomicU32::new(failures),
            calls: AtomicU32::new(0),
            refuse,
        });
        let options = ClientOptions {
            initial_backoff: Duration::from_millis(1),
            ..ClientOptions::default()
        };
        let c = VlmClient::with_options(backend.clone(), DecodingSettings::default(), options);
        (backend, c)
    }

    #[test]
    fn empty_conversation_is_rejected() {
        let (_, c) = client(0, false);
        assert!(matches!(c.complete(&[]), Err(BackendError::Precondition(_))));
        assert!(matches!(
            c.complete(&[Message::system("s")]),
            Err(BackendError::Precondition(_))
        ));
    }

    #[test]
    fn transport_errors_are_retried_up_to_the_bound() {
        let (b, c) = client(3, false);
        assert_eq!(c.complete(&[Message::user("hi")]).unwrap().text, "ok");
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);

        let (b, c) = client(10, false);
        match c.complete(&[Message::user("hi")]) {
            Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn refusals_are_not_retried() {
        let (b, c) = client(0, true);
        assert!(matches!(
            c.complete(&[Message::user("hi")]),
            Err(BackendError::Refusal(_))
        ));
        assert_eq!(b.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn digest_depends_on_settings_sample_and_content() {
        let s = DecodingSettings::default();
        let conv = vec![Message::user("hi")];
        let d0 = request_digest(&s, 0, &conv);
        assert_eq!(d0, request_digest(&s, 0, &conv.clone()));
        assert_ne!(d0, request_digest(&s, 1, &conv));
        let hot = DecodingSettings {
            temperature: 0.2,
            ..s.clone()
        };
        assert_ne!(d0, request_digest(&hot, 0, &conv));
        assert_ne!(d0, request_digest(&s, 0, &[Message::user("hi!")]));
        assert_eq!(d0.len(), 64);
    }

    #[test]
    fn digest_is_stable_across_runs() {
        // Frozen: a change here invalidates every recorded transcript.
        let conv = vec![
            Message::system("sys"),
            Message::new(
                Role::User,
                vec![Part::series(FORCE_LABEL, vec![0.0, 0.5]), Part::image("f/0.png", None)],
            ),
        ];
        let d = request_digest(&DecodingSettings::default(), 0, &conv);
        assert_eq!(d, "90b9ba599e0e20d88101029a2b35087f704b3f7e0a6e991f81d9aa1c63defe14");
    }
}
