//! Append-only JSONL transcript log.
//!
//! One record per line: `{"ts":"<RFC3339>","role":"system|human|ai","content":"..."}`.
//! Each record is written and flushed on its own so a crash loses at most
//! the line being written.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::MemoryState;
use crate::messages::{Message, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub ts: String,
    pub role: Role,
    pub content: String,
}

impl TranscriptRecord {
    pub fn new(message: &Message, at: DateTime<Utc>) -> Self {
        Self {
            ts: at.to_rfc3339_opts(SecondsFormat::Millis, true),
            role: message.role,
            content: message.content.clone(),
        }
    }

    pub fn message(&self) -> Message {
        Message::new(self.role, self.content.clone())
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("transcript structure: {0}")]
    Structure(String),
}

/// Appends records to one transcript file.
#[derive(Debug)]
pub struct TranscriptWriter {
    path: PathBuf,
    file: File,
}

impl TranscriptWriter {
    /// Creates a new, empty transcript. Fails if the file already exists.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self, TranscriptError> {
        let path = path.into();
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|source| TranscriptError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, message: &Message) -> Result<(), TranscriptError> {
        self.append_at(message, Utc::now())
    }

    pub fn append_at(&mut self, message: &Message, at: DateTime<Utc>) -> Result<(), TranscriptError> {
        let mut line = serde_json::to_vec(&TranscriptRecord::new(message, at)).expect("record serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|()| self.file.flush())
            .map_err(|source| TranscriptError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Parses every line. Any malformed or partial line is an error.
pub fn read_records(path: &Path) -> Result<Vec<TranscriptRecord>, TranscriptError> {
    let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(&text).map_err(|(line, reason)| TranscriptError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    })
}

fn parse_records(text: &str) -> Result<Vec<TranscriptRecord>, (usize, String)> {
    if !text.is_empty() && !text.ends_with('\n') {
        let line = text.lines().count();
        return Err((line, "last line is not newline-terminated (truncated write?)".into()));
    }
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let record: TranscriptRecord = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
            DateTime::parse_from_rfc3339(&record.ts).map_err(|e| (i + 1, format!("bad timestamp: {e}")))?;
            Ok(record)
        })
        .collect()
}

pub fn read_messages(path: &Path) -> Result<Vec<Message>, TranscriptError> {
    Ok(read_records(path)?.iter().map(TranscriptRecord::message).collect())
}

/// Rebuilds memory from a transcript's messages.
///
/// Accepts an optional leading AI message (the welcome) followed by strict
/// human/AI pairs.
pub fn memory_from_messages(messages: &[Message]) -> Result<MemoryState, TranscriptError> {
    let mut rest = messages;
    let mut state = MemoryState::new();
    if let Some(first) = rest.first().filter(|m| m.role == Role::Ai) {
        state = state.with_preamble(first.clone()).expect("AI preamble");
        rest = &rest[1..];
    }
    let mut pairs = rest.chunks_exact(2);
    for (i, pair) in pairs.by_ref().enumerate() {
        match (pair[0].role, pair[1].role) {
            (Role::Human, Role::Ai) => state.save(pair[0].content.clone(), pair[1].content.clone()),
            (a, b) => {
                return Err(TranscriptError::Structure(format!(
                    "turn {}: expected human then ai, found {a} then {b}",
                    i + 1
                )))
            }
        }
    }
    if let [dangling] = pairs.remainder() {
        return Err(TranscriptError::Structure(format!(
            "trailing {} message without a reply",
            dangling.role
        )));
    }
    Ok(state)
}
