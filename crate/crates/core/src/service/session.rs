use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::chain::{build_chain, Chain, ChainError};
use crate::memory::MemoryPolicy;
use crate::messages::Message;
use crate::model_client::{ChatModel, ModelConfig, ModelError};
use crate::persona::{PersonaError, PersonaRegistry, DEFAULT_PERSONA_ID};
use crate::transcript::{TranscriptError, TranscriptWriter};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("message is empty")]
    EmptyMessage,
    #[error("another message is already being processed for this session")]
    SessionBusy,
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("model backend failed: {0}")]
    Upstream(#[from] ModelError),
    #[error("persona {id:?} cannot be used: {source}")]
    InvalidPersona {
        id: String,
        #[source]
        source: ChainError,
    },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

impl ServiceError {
    /// Machine-readable code used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::EmptyMessage => "empty_message",
            ServiceError::SessionBusy => "session_busy",
            ServiceError::UnknownPersona(_) => "unknown_persona",
            ServiceError::Upstream(_) => "upstream_error",
            ServiceError::InvalidPersona { .. } | ServiceError::Transcript(_) => "internal_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreatedSession {
    pub session_id: String,
    pub welcome: Message,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionInfo {
    pub id: String,
    pub persona_id: String,
    pub created_at: DateTime<Utc>,
    pub transcript_path: PathBuf,
}

struct SessionState {
    chain: Chain,
    transcript: TranscriptWriter,
}

struct Session {
    info: SessionInfo,
    last_active: Mutex<Instant>,
    state: tokio::sync::Mutex<SessionState>,
}

impl Session {
    fn touch(&self) {
        *self.last_active.lock().unwrap_or_else(|p| p.into_inner()) = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_active.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Live chat sessions, each with its own chain and transcript file.
///
/// Sessions run concurrently; within one session a second message while one
/// is in flight is rejected with [`ServiceError::SessionBusy`].
pub struct ChatService {
    personas: PersonaRegistry,
    backend: Arc<dyn ChatModel>,
    model: ModelConfig,
    policy: MemoryPolicy,
    transcript_dir: PathBuf,
    ttl: Duration,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl ChatService {
    pub fn new(
        personas: PersonaRegistry,
        backend: Arc<dyn ChatModel>,
        model: ModelConfig,
        policy: MemoryPolicy,
        transcript_dir: impl Into<PathBuf>,
        ttl: Duration,
    ) -> Self {
        Self {
            personas,
            backend,
            model,
            policy,
            transcript_dir: transcript_dir.into(),
            ttl,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Session>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn transcript_dir(&self) -> &Path {
        &self.transcript_dir
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn session_info(&self, id: &str) -> Result<SessionInfo, ServiceError> {
        Ok(self.lookup(id)?.info.clone())
    }

    /// Starts a session for `persona_id` (default `mindguide`) and writes the
    /// welcome as the transcript's first line.
    pub fn create_session(&self, persona_id: Option<&str>) -> Result<CreatedSession, ServiceError> {
        let persona_id = persona_id.unwrap_or(DEFAULT_PERSONA_ID);
        let persona = self.personas.get(persona_id).map_err(|e| match e {
            PersonaError::Unknown(id) => ServiceError::UnknownPersona(id),
            other => ServiceError::UnknownPersona(other.to_string()),
        })?;
        let chain = build_chain(persona, self.backend.clone(), self.model.clone(), self.policy).map_err(|source| {
            ServiceError::InvalidPersona {
                id: persona_id.to_string(),
                source,
            }
        })?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let transcript_path = self.transcript_dir.join(format!("{id}.jsonl"));
        let mut transcript = TranscriptWriter::create(&transcript_path)?;
        let welcome = Message::ai(persona.welcome.clone());
        transcript.append(&welcome)?;

        let session = Arc::new(Session {
            info: SessionInfo {
                id: id.clone(),
                persona_id: persona_id.to_string(),
                created_at: Utc::now(),
                transcript_path,
            },
            last_active: Mutex::new(Instant::now()),
            state: tokio::sync::Mutex::new(SessionState { chain, transcript }),
        });
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.clone(), session);
        tracing::info!(session = %id, persona = persona_id, "session created");
        Ok(CreatedSession { session_id: id, welcome })
    }

    /// Runs one chain turn and appends both messages to the transcript.
    pub async fn post_message(&self, session_id: &str, content: &str) -> Result<Message, ServiceError> {
        let session = self.lookup(session_id)?;
        if content.trim().is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        let mut state = session.state.try_lock().map_err(|_| ServiceError::SessionBusy)?;
        session.touch();
        let result = state.chain.run(content).await;
        session.touch();
        let output = match result {
            Ok(output) => output,
            Err(ChainError::Model(e)) => {
                tracing::warn!(session = %session_id, class = e.class(), "model call failed");
                return Err(ServiceError::Upstream(e));
            }
            Err(other) => {
                return Err(ServiceError::InvalidPersona {
                    id: session.info.persona_id.clone(),
                    source: other,
                })
            }
        };
        state.transcript.append(&Message::human(content))?;
        state.transcript.append(&output.reply)?;
        Ok(output.reply)
    }

    /// Welcome plus every exchange, in order.
    pub async fn get_history(&self, session_id: &str) -> Result<Vec<Message>, ServiceError> {
        let session = self.lookup(session_id)?;
        let state = session.state.lock().await;
        Ok(state.chain.memory().all_messages())
    }

    /// Forgets the session. Its transcript file stays on disk.
    pub fn delete_session(&self, session_id: &str) -> Result<(), ServiceError> {
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .remove(session_id)
            .map(|_| tracing::info!(session = %session_id, "session deleted"))
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))
    }

    /// Removes sessions idle for longer than the TTL as of `now`. Sessions
    /// with a message in flight are kept.
    pub fn expire_idle_at(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        let before = sessions.len();
        sessions.retain(|_, s| {
            let idle = now.saturating_duration_since(s.idle_since()) > self.ttl;
            !idle || s.state.try_lock().is_err()
        });
        before - sessions.len()
    }

    pub fn expire_idle(&self) -> usize {
        self.expire_idle_at(Instant::now())
    }
}
