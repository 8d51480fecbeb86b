//! Optional pass-through to an external completion endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptDocument;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    pub timeout_ms: u64,
    #[serde(default)]
    pub model: Option<String>,
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), CompletionError> {
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(CompletionError::Config(format!("endpoint url {:?} is not http(s)", self.url)));
        }
        if self.timeout_ms == 0 {
            return Err(CompletionError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("network error: {0}")]
    Network(String),
    #[error("completion timed out after {0} ms")]
    Timeout(u64),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid endpoint config: {0}")]
    Config(String),
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
    prompt: &'a str,
}

/// POSTs the rendered prompt and returns the raw response body untouched.
/// Blocking; call from a blocking context.
pub fn complete_via_model(prompt: &PromptDocument, config: &EndpointConfig) -> Result<String, CompletionError> {
    config.validate()?;
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_millis(config.timeout_ms))
        .build()
        .map_err(|e| CompletionError::Network(e.to_string()))?;

    let body = serde_json::to_vec(&CompletionRequest {
        model: config.model.as_deref(),
        prompt: &prompt.rendered,
    })
    .expect("request serializes");
    let mut request = client
        .post(&config.url)
        .header(reqwest::header::CONTENT_TYPE, "application/json")
        .body(body);
    if let Some(var) = &config.token_env {
        let token = std::env::var(var).map_err(|_| CompletionError::Auth(format!("token variable {var} is not set")))?;
        request = request.bearer_auth(token);
    }

    let classify = |e: reqwest::Error| {
        if e.is_timeout() {
            CompletionError::Timeout(config.timeout_ms)
        } else {
            CompletionError::Network(e.to_string())
        }
    };
    let response = request.send().map_err(classify)?;
    let status = response.status();
    let body = response.text().map_err(classify)?;
    if status.as_u16() == 401 || status.as_u16() == 403 {
        return Err(CompletionError::Auth(format!("HTTP {}: {}", status.as_u16(), body)));
    }
    if !status.is_success() {
        return Err(CompletionError::Status {
            status: status.as_u16(),
            body,
        });
    }
    Ok(body)
}
