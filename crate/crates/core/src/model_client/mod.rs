//! Chat-model backends: a list of messages in, one AI message out.
//!
//! [`RemoteBackend`] speaks the chat-completions wire protocol over HTTP;
//! [`ScriptedBackend`] replays canned replies and records every request for
//! assertions.

mod config;
mod remote;
mod scripted;
pub mod wire;

use std::time::Duration;

use async_trait::async_trait;
use thiserror::Error;

use crate::messages::Message;

pub use config::{ConfigError, ModelConfig, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
pub use remote::RemoteBackend;
pub use scripted::{ScriptError, ScriptedBackend};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("network error: {0}")]
    Network(String),
    #[error("credential rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("rate limited{}", retry_after.map(|d| format!(", retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("upstream returned HTTP {status}: {message}")]
    Api { status: u16, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("scripted backend has no replies left")]
    ScriptExhausted,
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
}

impl ModelError {
    /// Stable snake_case name of the error class, surfaced by the service.
    pub fn class(&self) -> &'static str {
        match self {
            ModelError::Network(_) => "network_error",
            ModelError::Auth { .. } => "auth_error",
            ModelError::RateLimited { .. } => "rate_limited",
            ModelError::Api { .. } => "api_error",
            ModelError::MalformedResponse(_) => "malformed_response",
            ModelError::ScriptExhausted => "script_exhausted",
            ModelError::MissingCredential(_) => "missing_credential",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("completion request needs at least one message")]
pub struct EmptyRequest;

/// A validated request: config plus a non-empty message list.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    config: ModelConfig,
    messages: Vec<Message>,
}

impl CompletionRequest {
    pub fn new(config: ModelConfig, messages: Vec<Message>) -> Result<Self, EmptyRequest> {
        if messages.is_empty() {
            return Err(EmptyRequest);
        }
        Ok(Self { config, messages })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }
}

/// Anything that can answer a chat request with a single AI message.
#[async_trait]
pub trait ChatModel: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<Message, ModelError>;
}

#[async_trait]
impl<T: ChatModel + ?Sized> ChatModel for std::sync::Arc<T> {
    async fn complete(&self, request: &CompletionRequest) -> Result<Message, ModelError> {
        (**self).complete(request).await
    }
}
