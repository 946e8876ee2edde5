//! Uniform access to chat-completion providers.
//!
//! Every call goes through [`complete`], which enforces the payload and
//! sampling preconditions before a provider sees the request. Transport
//! retries are deliberately absent: failures surface to the caller at once.

mod http;
pub mod mock;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpProvider, HttpProviderConfig};
pub use mock::{MockProvider, MockScript, ScriptEntry, ScriptFile};

/// Upper bound applied to temperature and top_p in deterministic mode.
pub const DETERMINISTIC_LIMIT: f64 = 0.1;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("prompt payload has an empty user message")]
    EmptyPrompt,
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error("provider unreachable: {0}")]
    ProviderUnreachable(String),
    #[error("provider returned status {status}: {body}")]
    ProviderError { status: u16, body: String },
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid mock script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: DETERMINISTIC_LIMIT,
            top_p: DETERMINISTIC_LIMIT,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl SamplingParams {
    pub fn new(temperature: f64, top_p: f64, max_tokens: u32) -> Result<Self, GatewayError> {
        let params = Self {
            temperature,
            top_p,
            max_tokens,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidParams(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Caps temperature and top_p at [`DETERMINISTIC_LIMIT`].
    pub fn clamp_for_determinism(self) -> Self {
        Self {
            temperature: self.temperature.min(DETERMINISTIC_LIMIT),
            top_p: self.top_p.min(DETERMINISTIC_LIMIT),
            ..self
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub system_instructions: String,
    pub user_message: String,
    /// Routing hints such as `scenario`, `attempt` and `profile`.
    pub metadata: BTreeMap<String, String>,
}

impl PromptPayload {
    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// System and user text joined the way section offsets are measured.
    pub fn full_text(&self) -> String {
        if self.system_instructions.is_empty() {
            self.user_message.clone()
        } else {
            format!("{}\n\n{}", self.system_instructions, self.user_message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_seconds: f64,
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Provider-specific call. Use [`complete`] instead of calling this
    /// directly so the preconditions are enforced.
    fn call(&self, payload: &PromptPayload, params: &SamplingParams) -> Result<RawResponse, GatewayError>;
}

pub fn complete(
    provider: &dyn ChatProvider,
    payload: &PromptPayload,
    params: &SamplingParams,
) -> Result<RawResponse, GatewayError> {
    if payload.user_message.trim().is_empty() {
        return Err(GatewayError::EmptyPrompt);
    }
    params.validate()?;
    provider.call(payload, params)
}
