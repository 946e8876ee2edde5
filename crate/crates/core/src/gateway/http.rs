//! Chat-completion HTTP provider (`POST {base_url}/chat/completions`).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatProvider, GatewayError, PromptPayload, RawResponse, SamplingParams};
use crate::retrieval::count_tokens;

const BODY_EXCERPT: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token. `None` sends no key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug)]
pub struct HttpProvider {
    config: HttpProviderConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, GatewayError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::MissingApiKey(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, payload: &PromptPayload, params: &SamplingParams) -> Value {
        let mut messages = Vec::new();
        if !payload.system_instructions.is_empty() {
            messages.push(json!({"role": "system", "content": payload.system_instructions}));
        }
        messages.push(json!({"role": "user", "content": payload.user_message}));
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_tokens,
            "stream": false,
        })
    }
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT).collect()
}

/// Pulls text and token usage out of a chat-completion reply body.
pub(crate) fn parse_reply(status: u16, body: &str) -> Result<(String, Option<u64>, Option<u64>), GatewayError> {
    let malformed = || GatewayError::ProviderError {
        status,
        body: excerpt(body),
    };
    let value: Value = serde_json::from_str(body).map_err(|_| malformed())?;
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(malformed)?
        .to_string();
    let usage = |field: &str| value.pointer(&format!("/usage/{field}")).and_then(Value::as_u64);
    Ok((text, usage("prompt_tokens"), usage("completion_tokens")))
}

impl ChatProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.model
    }

    fn call(&self, payload: &PromptPayload, params: &SamplingParams) -> Result<RawResponse, GatewayError> {
        let started = Instant::now();
        let mut request = self.client.post(self.endpoint()).json(&self.request_body(payload, params));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::ProviderError {
                status,
                body: excerpt(&body),
            });
        }
        let (text, prompt_tokens, completion_tokens) = parse_reply(status, &body)?;
        Ok(RawResponse {
            prompt_tokens: prompt_tokens.unwrap_or_else(|| count_tokens(&payload.full_text()) as u64),
            completion_tokens: completion_tokens.unwrap_or_else(|| count_tokens(&text) as u64),
            text,
            latency_seconds: started.elapsed().as_secs_f64(),
        })
    }
}
