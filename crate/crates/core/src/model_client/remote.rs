use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use reqwest::header::{AUTHORIZATION, CONTENT_TYPE, RETRY_AFTER};
use reqwest::StatusCode;

use super::wire::{decode_error_message, decode_response, encode_request};
use super::{ChatModel, CompletionRequest, ModelError};
use crate::messages::Message;

/// Credential wrapper whose `Debug` never prints the value.
#[derive(Clone)]
struct ApiKey(String);

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

/// HTTP chat-completions backend. Stateless per request; share freely.
///
/// Endpoint, model and temperature come from each request's config. The
/// credential is read once from the environment at construction.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: reqwest::Client,
    api_key: ApiKey,
}

impl RemoteBackend {
    /// Reads the credential from the variable named by `api_key_env`.
    pub fn from_env(api_key_env: &str) -> Result<Self, ModelError> {
        let key = std::env::var(api_key_env).map_err(|_| ModelError::MissingCredential(api_key_env.to_string()))?;
        Ok(Self::with_api_key(key))
    }

    pub fn with_api_key(api_key: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            api_key: ApiKey(api_key.into()),
        }
    }
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<Duration> {
    headers
        .get(RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| s.is_finite() && *s >= 0.0)
        .map(Duration::from_secs_f64)
}

#[async_trait]
impl ChatModel for RemoteBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<Message, ModelError> {
        let config = request.config();
        let body = encode_request(request);
        tracing::debug!(model = %config.model_name, messages = request.messages().len(), "sending completion request");

        let response = self
            .client
            .post(&config.endpoint_url)
            .header(AUTHORIZATION, format!("Bearer {}", self.api_key.0))
            .header(CONTENT_TYPE, "application/json")
            .timeout(config.timeout())
            .body(body)
            .send()
            .await
            .map_err(|e| ModelError::Network(e.without_url().to_string()))?;

        let status = response.status();
        let retry = retry_after(response.headers());
        let bytes = response
            .bytes()
            .await
            .map_err(|e| ModelError::Network(e.without_url().to_string()))?;

        match status {
            s if s.is_success() => decode_response(&bytes),
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(ModelError::Auth {
                status: status.as_u16(),
                message: decode_error_message(&bytes),
            }),
            StatusCode::TOO_MANY_REQUESTS => Err(ModelError::RateLimited { retry_after: retry }),
            _ => Err(ModelError::Api {
                status: status.as_u16(),
                message: decode_error_message(&bytes),
            }),
        }
    }
}
