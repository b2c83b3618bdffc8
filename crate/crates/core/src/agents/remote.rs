use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Agent, AgentError};
use crate::protocol::{Message, Part, Role};

/// How image parts are encoded in the request body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagePartStyle {
    /// `{"type": "image", "image": "data:image/png;base64,..."}`
    #[default]
    Image,
    /// `{"type": "image_url", "image_url": {"url": "data:image/png;base64,..."}}`
    ImageUrl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default)]
    pub image_style: ImagePartStyle,
}

fn default_timeout() -> f64 {
    120.0
}

fn default_max_tokens() -> u32 {
    1024
}

impl RemoteEndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            timeout_secs: default_timeout(),
            max_tokens: default_max_tokens(),
            temperature: 0.0,
            api_key: None,
            image_style: ImagePartStyle::Image,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(AgentError::Config("timeout must be positive".into()));
        }
        if self.base_url.is_empty() || self.model.is_empty() {
            return Err(AgentError::Config("base_url and model are required".into()));
        }
        Ok(())
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AgentError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| AgentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `VISIONWEB_ENDPOINT`, `VISIONWEB_MODEL` and optionally
    /// `VISIONWEB_API_KEY`, `VISIONWEB_TIMEOUT_SECS`.
    pub fn from_env() -> Result<Self, AgentError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let base = var("VISIONWEB_ENDPOINT")
            .ok_or_else(|| AgentError::Config("VISIONWEB_ENDPOINT is not set".into()))?;
        let model = var("VISIONWEB_MODEL")
            .ok_or_else(|| AgentError::Config("VISIONWEB_MODEL is not set".into()))?;
        let mut cfg = Self::new(base, model);
        cfg.api_key = var("VISIONWEB_API_KEY");
        if let Some(t) = var("VISIONWEB_TIMEOUT_SECS") {
            cfg.timeout_secs = t
                .parse()
                .map_err(|_| AgentError::Config(format!("bad VISIONWEB_TIMEOUT_SECS {t:?}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

/// Chat request body for `messages`.
pub fn request_body(config: &RemoteEndpointConfig, messages: &[Message]) -> Value {
    let b64 = base64::engine::general_purpose::STANDARD;
    let msgs: Vec<Value> = messages
        .iter()
        .map(|m| {
            let content: Vec<Value> = m
                .parts
                .iter()
                .map(|p| match p {
                    Part::Text(t) => json!({"type": "text", "text": t}),
                    Part::Image(png) => {
                        let url = format!("data:image/png;base64,{}", b64.encode(png));
                        match config.image_style {
                            ImagePartStyle::Image => json!({"type": "image", "image": url}),
                            ImagePartStyle::ImageUrl => {
                                json!({"type": "image_url", "image_url": {"url": url}})
                            }
                        }
                    }
                })
                .collect();
            json!({"role": role_name(m.role), "content": content})
        })
        .collect();
    json!({
        "model": config.model,
        "messages": msgs,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    })
}

/// Text of the first choice's message; content may be a string or a list of text parts.
pub fn reply_text(body: &Value) -> Result<String, AgentError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or(AgentError::EmptyReply)?;
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    };
    if text.trim().is_empty() {
        return Err(AgentError::EmptyReply);
    }
    Ok(text)
}

/// Any chat-completion endpoint that accepts image parts.
pub struct RemoteVlmAgent {
    config: RemoteEndpointConfig,
    http: ureq::Agent,
}

impl RemoteVlmAgent {
    pub fn new(config: RemoteEndpointConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &RemoteEndpointConfig {
        &self.config
    }
}

fn map_transport(e: ureq::Error) -> AgentError {
    match e {
        ureq::Error::Timeout(_) => AgentError::Timeout,
        ureq::Error::StatusCode(s) => AgentError::HttpError(s),
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => AgentError::Timeout,
        other => AgentError::Transport(other.to_string()),
    }
}

impl Agent for RemoteVlmAgent {
    fn name(&self) -> String {
        format!("remote({})", self.config.model)
    }

    fn respond(&mut self, messages: &[Message]) -> Result<String, AgentError> {
        let body = request_body(&self.config, messages);
        let mut req = self.http.post(&self.config.url());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(map_transport)?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(AgentError::HttpError(status));
        }
        let value: Value = resp.body_mut().read_json().map_err(map_transport)?;
        reply_text(&value)
    }

    fn is_remote(&self) -> bool {
        true
    }
}
