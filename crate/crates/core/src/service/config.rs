use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryPolicy;
use crate::model_client::{ChatModel, ConfigError, ModelConfig, ModelError, RemoteBackend, ScriptError, ScriptedBackend};

pub const CONFIG_ENV: &str = "MINDGUIDE_CONFIG";

/// Which model backend the service talks to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    #[default]
    Remote,
    Scripted { script: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub model: ModelConfig,
    pub memory: MemoryPolicy,
    pub backend: BackendConfig,
    /// Extra persona files; the built-in persona is always available.
    pub persona_dir: Option<PathBuf>,
    pub transcript_dir: PathBuf,
    /// Built web UI assets, served under `/` when set.
    pub static_dir: Option<PathBuf>,
    pub session_ttl_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            model: ModelConfig::default(),
            memory: MemoryPolicy::Buffer,
            backend: BackendConfig::Remote,
            persona_dir: None,
            transcript_dir: PathBuf::from("transcripts"),
            static_dir: None,
            session_ttl_secs: 60 * 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("reading config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("model config: {0}")]
    Model(#[from] ConfigError),
    #[error("session_ttl_secs must be positive")]
    Ttl,
    #[error("directory {path}: {reason}")]
    Directory { path: PathBuf, reason: String },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Backend(#[from] ModelError),
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServiceConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ServiceConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// `path` if given, else `$MINDGUIDE_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self, ServiceConfigError> {
        match path {
            Some(p) => Self::from_file(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::from_file(Path::new(&p)),
                None => Ok(Self::default()),
            },
        }
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }

    /// Checks values and creates the transcript directory if needed.
    pub fn prepare(&self) -> Result<(), ServiceConfigError> {
        self.model.validate()?;
        if self.session_ttl_secs == 0 {
            return Err(ServiceConfigError::Ttl);
        }
        std::fs::create_dir_all(&self.transcript_dir).map_err(|e| ServiceConfigError::Directory {
            path: self.transcript_dir.clone(),
            reason: e.to_string(),
        })?;
        for dir in [&self.persona_dir, &self.static_dir].into_iter().flatten() {
            if !dir.is_dir() {
                return Err(ServiceConfigError::Directory {
                    path: dir.clone(),
                    reason: "not a directory".into(),
                });
            }
        }
        Ok(())
    }

    pub fn build_backend(&self) -> Result<Arc<dyn ChatModel>, ServiceConfigError> {
        Ok(match &self.backend {
            BackendConfig::Remote => Arc::new(RemoteBackend::from_env(&self.model.api_key_env)?),
            BackendConfig::Scripted { script } => Arc::new(ScriptedBackend::from_file(script)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_config() {
        let c: ServiceConfig = serde_json::from_str(
            r#"{"port": 9000, "memory": {"kind": "window", "k": 4},
                "backend": {"kind": "scripted", "script": "s.json"},
                "model": {"temperature": 0.7}}"#,
        )
        .unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.memory, MemoryPolicy::window(4).unwrap());
        assert_eq!(c.backend, BackendConfig::Scripted { script: "s.json".into() });
        assert_eq!(c.model.model_name, "gpt-4");
        assert_eq!(c.session_ttl(), Duration::from_secs(3600));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"api_key": "sk-1"}"#).is_err());
    }

    #[test]
    fn prepare_creates_transcript_dir() {
        let dir = tempfile::tempdir().unwrap();
        let c = ServiceConfig {
            transcript_dir: dir.path().join("a/b"),
            ..Default::default()
        };
        c.prepare().unwrap();
        assert!(dir.path().join("a/b").is_dir());

        let bad = ServiceConfig {
            persona_dir: Some(dir.path().join("missing")),
            transcript_dir: dir.path().join("t"),
            ..Default::default()
        };
        assert!(matches!(bad.prepare(), Err(ServiceConfigError::Directory { .. })));
        let bad = ServiceConfig {
            session_ttl_secs: 0,
            transcript_dir: dir.path().join("t"),
            ..Default::default()
        };
        assert!(matches!(bad.prepare(), Err(ServiceConfigError::Ttl)));
    }

    #[test]
    fn from_file_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        assert!(matches!(ServiceConfig::from_file(&p), Err(ServiceConfigError::Read { .. })));
        std::fs::write(&p, "{").unwrap();
        assert!(matches!(ServiceConfig::from_file(&p), Err(ServiceConfigError::Parse { .. })));
        std::fs::write(&p, r#"{"port": 1234}"#).unwrap();
        assert_eq!(ServiceConfig::resolve(Some(&p)).unwrap().port, 1234);
    }
}
