use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::backend::{ClientOptions, DecodingSettings, LiveConfig};
use crate::dsl::InterpretOptions;
use crate::modality::ModalitySet;
use crate::orchestrator::{PromptSettings, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Replay,
    Live,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendKind::Mock),
            "replay" => Ok(BackendKind::Replay),
            "live" => Ok(BackendKind::Live),
            _ => Err(format!("unknown backend '{s}' (expected mock, replay or live)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSettings {
    pub kind: BackendKind,
    /// Replay: recorded exchanges to answer from. Mock and live: where to
    /// record, defaulting to `transcript.jsonl` in the output directory.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    /// Mock rules for single-recording pipeline runs; defaults to
    /// `mock.json` next to the manifest.
    #[serde(default)]
    pub mock: Option<PathBuf>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_model() -> String {
    DecodingSettings::default().model
}
fn default_temperature() -> f64 {
    DecodingSettings::default().temperature
}
fn default_timeout() -> u64 {
    120
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}

impl BackendSettings {
    pub fn decoding(&self) -> DecodingSettings {
        DecodingSettings {
            model: self.model.clone(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    pub fn client_options(&self) -> ClientOptions {
        ClientOptions {
            max_in_flight: self.max_in_flight,
            max_retries: self.max_retries,
            ..ClientOptions::default()
        }
    }

    pub fn live_config(&self) -> Result<LiveConfig, EvalError> {
        match (&self.endpoint, &self.api_key_env) {
            (Some(endpoint), Some(env)) => Ok(LiveConfig {
                endpoint: endpoint.clone(),
                api_key_env: env.clone(),
                timeout_s: self.timeout_s,
            }),
            _ => Err(EvalError::Config(
                "live backend needs backend.endpoint and backend.api_key_env".into(),
            )),
        }
    }
}

fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::CoM]
}
fn default_ablations() -> Vec<ModalitySet> {
    vec![ModalitySet::ALL]
}
fn default_trials() -> u32 {
    3
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_parallelism() -> usize {
    4
}
fn default_execute() -> bool {
    true
}

/// Evaluation run configuration, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub corpus_dir: PathBuf,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_ablations")]
    pub ablations: Vec<ModalitySet>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Recorded in reports. Every pipeline stage is deterministic given the
    /// backend, so nothing draws from it yet.
    #[serde(default)]
    pub seed: u64,
    /// Generate and simulate a program for each parsed plan when the
    /// recording has a task spec.
    #[serde(default = "default_execute")]
    pub execute_programs: bool,
    pub backend: BackendSettings,
    #[serde(default)]
    pub prompt: PromptSettings,
    #[serde(default)]
    pub interpreter: InterpretOptions,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl EvalConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, EvalError> {
        let mut config: EvalConfig =
            toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut config.corpus_dir);
        resolve(&mut config.output_dir);
        if let Some(t) = config.backend.transcript.as_mut() {
            resolve(t);
        }
        if let Some(m) = config.backend.mock.as_mut() {
            resolve(m);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
            .map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.ablations.is_empty() {
            return bad("at least one modality subset is required");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.backend.kind == BackendKind::Replay && self.backend.transcript.is_none() {
            return bad("replay backend needs backend.transcript");
        }
        if self.interpreter.max_unrolled == 0 {
            return bad("interpreter.max_unrolled must be at least 1");
        }
        Ok(())
    }

    /// Where mock and live runs record their exchanges.
    pub fn record_path(&self) -> Option<PathBuf> {
        match self.backend.kind {
            BackendKind::Replay => None,
            _ => Some(
                self.backend
                    .transcript
                    .clone()
                    .unwrap_or_else(|| self.output_dir.join("transcript.jsonl")),
            ),
        }
    }
}
