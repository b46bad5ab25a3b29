use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
const DEFAULT_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("temperature {0} outside [0.0, 2.0]")]
    Temperature(f64),
    #[error("max_tokens must be positive")]
    MaxTokens,
    #[error("invalid endpoint url {url:?}: {reason}")]
    Endpoint { url: String, reason: String },
    #[error("api_key_env must name an environment variable")]
    ApiKeyEnv,
    #[error("timeout must be positive")]
    Timeout,
}

/// Backend settings. Holds the *name* of the credential variable, never the
/// credential itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub model_name: String,
    pub temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub endpoint_url: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            model_name: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: None,
            endpoint_url: DEFAULT_ENDPOINT.to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.max_tokens == Some(0) {
            return Err(ConfigError::MaxTokens);
        }
        let url = reqwest::Url::parse(&self.endpoint_url).map_err(|e| ConfigError::Endpoint {
            url: self.endpoint_url.clone(),
            reason: e.to_string(),
        })?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ConfigError::Endpoint {
                url: self.endpoint_url.clone(),
                reason: "scheme must be http or https".into(),
            });
        }
        let name_ok = !self.api_key_env.is_empty()
            && !self.api_key_env.contains(['=', '\0'])
            && !self.api_key_env.chars().any(char::is_whitespace);
        if !name_ok {
            return Err(ConfigError::ApiKeyEnv);
        }
        if self.timeout_secs == 0 {
            return Err(ConfigError::Timeout);
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = ModelConfig::default();
        assert_eq!(c.model_name, "gpt-4");
        assert_eq!(c.temperature, 0.5);
        assert_eq!(c.max_tokens, None);
        assert_eq!(c.api_key_env, "OPENAI_API_KEY");
        assert_eq!(c.timeout(), Duration::from_secs(60));
        c.validate().unwrap();
    }

    #[test]
    fn temperature_bounds() {
        for t in [0.0, 0.5, 2.0] {
            ModelConfig { temperature: t, ..Default::default() }.validate().unwrap();
        }
        for t in [-0.01, 2.01, f64::NAN] {
            assert!(ModelConfig { temperature: t, ..Default::default() }.validate().is_err());
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let bad = [
            ModelConfig { max_tokens: Some(0), ..Default::default() },
            ModelConfig { endpoint_url: "not a url".into(), ..Default::default() },
            ModelConfig { endpoint_url: "ftp://x/y".into(), ..Default::default() },
            ModelConfig { api_key_env: "".into(), ..Default::default() },
            ModelConfig { api_key_env: "A B".into(), ..Default::default() },
            ModelConfig { timeout_secs: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: ModelConfig = serde_json::from_str(r#"{"temperature": 0.2}"#).unwrap();
        assert_eq!(c.temperature, 0.2);
        assert_eq!(c.model_name, "gpt-4");
        assert!(serde_json::from_str::<ModelConfig>(r#"{"api_key": "sk-x"}"#).is_err());
    }
}
