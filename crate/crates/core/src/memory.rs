//! Session memory: read before a run, write after it.
//!
//! Storage keeps every exchange. The policy only decides what a read
//! returns: [`MemoryPolicy::Buffer`] returns everything,
//! [`MemoryPolicy::Window`] returns the last `k` exchanges.
//!
//! Summary and entity-extraction memories would slot in as further
//! [`MemoryPolicy`] variants over the same stored exchanges.

use std::collections::HashMap;
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messages::{Message, Role};
use crate::prompting::is_identifier;

pub const DEFAULT_MEMORY_KEY: &str = "history";

/// One human turn and the AI reply to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    human: Message,
    ai: Message,
}

impl Exchange {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Self {
            human: Message::human(input),
            ai: Message::ai(output),
        }
    }

    pub fn human(&self) -> &Message {
        &self.human
    }

    pub fn ai(&self) -> &Message {
        &self.ai
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemoryPolicy {
    #[default]
    Buffer,
    Window { k: NonZeroUsize },
}

impl MemoryPolicy {
    /// `None` when `k == 0`.
    pub fn window(k: usize) -> Option<Self> {
        NonZeroUsize::new(k).map(|k| MemoryPolicy::Window { k })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("memory key {0:?} is not a valid template identifier")]
    InvalidKey(String),
    #[error("preamble must be an AI message, got {0}")]
    PreambleRole(Role),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryState {
    memory_key: String,
    exchanges: Vec<Exchange>,
    preamble: Option<Message>,
}

impl Default for MemoryState {
    fn default() -> Self {
        Self {
            memory_key: DEFAULT_MEMORY_KEY.to_string(),
            exchanges: Vec::new(),
            preamble: None,
        }
    }
}

impl MemoryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_key(key: impl Into<String>) -> Result<Self, MemoryError> {
        let key = key.into();
        if !is_identifier(&key) {
            return Err(MemoryError::InvalidKey(key));
        }
        Ok(Self {
            memory_key: key,
            ..Self::default()
        })
    }

    /// Sets the message shown before all exchanges, e.g. a stored welcome.
    pub fn with_preamble(mut self, preamble: Message) -> Result<Self, MemoryError> {
        if preamble.role != Role::Ai {
            return Err(MemoryError::PreambleRole(preamble.role));
        }
        self.preamble = Some(preamble);
        Ok(self)
    }

    pub fn memory_key(&self) -> &str {
        &self.memory_key
    }

    pub fn exchanges(&self) -> &[Exchange] {
        &self.exchanges
    }

    pub fn preamble(&self) -> Option<&Message> {
        self.preamble.as_ref()
    }

    /// The messages visible under `policy`: preamble, then the selected
    /// exchanges flattened human-then-ai.
    pub fn visible_messages(&self, policy: MemoryPolicy) -> Vec<Message> {
        let selected = match policy {
            MemoryPolicy::Buffer => &self.exchanges[..],
            MemoryPolicy::Window { k } => {
                let start = self.exchanges.len().saturating_sub(k.get());
                &self.exchanges[start..]
            }
        };
        let mut out = Vec::with_capacity(selected.len() * 2 + 1);
        out.extend(self.preamble.iter().cloned());
        for exchange in selected {
            out.push(exchange.human.clone());
            out.push(exchange.ai.clone());
        }
        out
    }

    /// Everything stored, regardless of policy.
    pub fn all_messages(&self) -> Vec<Message> {
        self.visible_messages(MemoryPolicy::Buffer)
    }

    /// `{memory_key: visible messages}`.
    pub fn load(&self, policy: MemoryPolicy) -> HashMap<String, Vec<Message>> {
        HashMap::from([(self.memory_key.clone(), self.visible_messages(policy))])
    }

    pub fn save(&mut self, input: impl Into<String>, output: impl Into<String>) {
        self.exchanges.push(Exchange::new(input, output));
    }

    /// Drops all exchanges; the preamble stays.
    pub fn clear(&mut self) {
        self.exchanges.clear();
    }
}
