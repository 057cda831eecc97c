use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, Part, Request};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    /// Chat-completion endpoint URL.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_timeout_s() -> u64 {
    120
}

pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl LiveBackend {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            BackendError::Config(format!(
                "environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: LiveConfig, api_key: String) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            http,
        })
    }
}

/// JSON body of a chat-completion request.
pub(crate) fn request_body(request: &Request<'_>) -> Value {
    let messages: Vec<Value> = request
        .messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Image { uri, path, .. } => {
                        let mut v = json!({ "type": "image", "uri": uri });
                        if let Some(bytes) = path.as_ref().and_then(|p| std::fs::read(p).ok()) {
                            v["media_type"] = json!(media_type(uri));
                            v["data"] =
                                json!(base64::engine::general_purpose::STANDARD.encode(bytes));
                        }
                        v
                    }
                    other => json!({ "type": "text", "text": other.render() }),
                })
                .collect();
            json!({ "role": m.role, "content": content })
        })
        .collect();
    let mut body = json!({
        "model": request.settings.model,
        "messages": messages,
        "temperature": request.settings.temperature,
    });
    if let Some(max) = request.settings.max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

fn media_type(uri: &str) -> &'static str {
    let ext = uri.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "jpg" | "jpeg" => "image/jpeg",
        "webp" => "image/webp",
        "gif" => "image/gif",
        _ => "image/png",
    }
}

/// Pulls the response text out of the common chat-completion response shapes.
pub(crate) fn extract_text(body: &Value) -> Result<String, BackendError> {
    if let Some(choice) = body.get("choices").and_then(|c| c.get(0)) {
        let msg = &choice["message"];
        if let Some(refusal) = msg.get("refusal").and_then(Value::as_str) {
            return Err(BackendError::Refusal(refusal.to_string()));
        }
        if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
            return Err(BackendError::Refusal("content_filter".into()));
        }
        if let Some(text) = msg.get("content").and_then(Value::as_str) {
            return Ok(text.to_string());
        }
    }
    if body.get("stop_reason").and_then(Value::as_str) == Some("refusal") {
        return Err(BackendError::Refusal("refusal".into()));
    }
    if let Some(blocks) = body.get("content").and_then(Value::as_array) {
        let text: String = blocks
            .iter()
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect();
        if !text.is_empty() {
            return Ok(text);
        }
    }
    for key in ["output_text", "text"] {
        if let Some(text) = body.get(key).and_then(Value::as_str) {
            return Ok(text.to_string());
        }
    }
    Err(BackendError::Protocol("no response text found".into()))
}

impl Backend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn send(&self, request: &Request<'_>) -> Result<String, BackendError> {
        let transport = |message: String| BackendError::Transport {
            attempts: 1,
            message,
        };
        let response = self
            .http
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&request_body(request))
            .send()
            .map_err(|e| transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: text.chars().take(512).collect(),
            });
        }
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol(format!("invalid JSON: {e}")))?;
        extract_text(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{DecodingSettings, Message};

    #[test]
    fn body_follows_wire_contract() {
        let settings = DecodingSettings {
            model: "m".into(),
            temperature: 0.5,
            max_tokens: None,
        };
        let msgs = vec![Message::new(
            crate::backend::Role::User,
            vec![Part::text("hi"), Part::image("img/0.png", None)],
        )];
        let req = Request {
            messages: &msgs,
            settings: &settings,
            sample: 0,
            digest: "d",
        };
        let body = request_body(&req);
        assert_eq!(body["model"], "m");
        assert_eq!(body["temperature"], 0.5);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"][0]["type"], "text");
        assert_eq!(body["messages"][0]["content"][1]["type"], "image");
        assert!(body.get("max_tokens").is_none());
    }

    #[test]
    fn extracts_from_known_shapes() {
        let openai = json!({"choices": [{"message": {"content": "a"}, "finish_reason": "stop"}]});
        assert_eq!(extract_text(&openai).unwrap(), "a");
        let blocks = json!({"content": [{"type": "text", "text": "b"}]});
        assert_eq!(extract_text(&blocks).unwrap(), "b");
        let refusal = json!({"choices": [{"message": {"content": null, "refusal": "no"}}]});
        assert!(matches!(extract_text(&refusal), Err(BackendError::Refusal(_))));
        assert!(matches!(
            extract_text(&json!({"x": 1})),
            Err(BackendError::Protocol(_))
        ));
    }
}
