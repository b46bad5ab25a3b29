use std::collections::VecDeque;
use std::sync::Mutex;

use async_trait::async_trait;

use super::{ChatModel, CompletionRequest, ModelError};
use crate::messages::Message;

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("reading script {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("script {path} must be a JSON array of strings: {source}")]
    Parse {
        path: std::path::PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Default)]
struct ScriptState {
    replies: VecDeque<String>,
    calls_seen: Vec<CompletionRequest>,
}

/// Deterministic backend returning pre-arranged replies in order.
///
/// Every request is recorded, including the one that finds the script
/// exhausted. Exhaustion is an error; replies are never recycled.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            state: Mutex::new(ScriptState {
                replies: replies.into_iter().map(Into::into).collect(),
                calls_seen: Vec::new(),
            }),
        }
    }

    /// Loads a script file: a JSON array of reply strings.
    pub fn from_file(path: &std::path::Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let replies: Vec<String> = serde_json::from_str(&text).map_err(|source| ScriptError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::new(replies))
    }

    pub fn calls_seen(&self) -> Vec<CompletionRequest> {
        self.lock().calls_seen.clone()
    }

    pub fn remaining(&self) -> usize {
        self.lock().replies.len()
    }

    /// Appends more replies to the end of the script.
    pub fn push_replies<I, S>(&self, replies: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.lock().replies.extend(replies.into_iter().map(Into::into));
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ScriptState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Synchronous form of [`ChatModel::complete`].
    pub fn reply(&self, request: &CompletionRequest) -> Result<Message, ModelError> {
        let mut state = self.lock();
        state.calls_seen.push(request.clone());
        state
            .replies
            .pop_front()
            .map(Message::ai)
            .ok_or(ModelError::ScriptExhausted)
    }
}

#[async_trait]
impl ChatModel for ScriptedBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<Message, ModelError> {
        self.reply(request)
    }
}
