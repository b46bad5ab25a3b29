//! Role-tagged messages and the append-only transcript container.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Who produced a message.
///
/// Serialized as the lowercase tags `"system"`, `"human"` and `"ai"` in the
/// transcript log and the HTTP API. The chat-completions wire names
/// (`system`/`user`/`assistant`) live in the model client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Human,
    #[serde(rename = "ai")]
    Ai,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::System, Role::Human, Role::Ai];

    /// The lowercase tag used in persisted transcripts and API bodies.
    pub fn tag(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::Human => "human",
            Role::Ai => "ai",
        }
    }

    /// Default label used when rendering a transcript as text.
    pub fn default_label(self) -> &'static str {
        match self {
            Role::System => "System",
            Role::Human => "Human",
            Role::Ai => "AI",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown role tag {0:?}")]
pub struct UnknownRole(pub String);

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(Role::System),
            "human" => Ok(Role::Human),
            "ai" => Ok(Role::Ai),
            other => Err(UnknownRole(other.to_string())),
        }
    }
}

/// One unit of conversation. Content is stored exactly as given.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn human(content: impl Into<String>) -> Self {
        Self::new(Role::Human, content)
    }

    pub fn ai(content: impl Into<String>) -> Self {
        Self::new(Role::Ai, content)
    }
}

/// Ordered, append-only list of messages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn extend<I: IntoIterator<Item = Message>>(&mut self, messages: I) {
        self.messages.extend(messages);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Message> {
        self.messages.iter()
    }
}

impl From<Vec<Message>> for Transcript {
    fn from(messages: Vec<Message>) -> Self {
        Self { messages }
    }
}

impl<'a> IntoIterator for &'a Transcript {
    type Item = &'a Message;
    type IntoIter = std::slice::Iter<'a, Message>;

    fn into_iter(self) -> Self::IntoIter {
        self.messages.iter()
    }
}

/// Per-role prefixes for [`format_transcript`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleLabels {
    pub system: Option<String>,
    pub human: Option<String>,
    pub ai: Option<String>,
}

impl Default for RoleLabels {
    fn default() -> Self {
        Self {
            system: Some(Role::System.default_label().to_string()),
            human: Some(Role::Human.default_label().to_string()),
            ai: Some(Role::Ai.default_label().to_string()),
        }
    }
}

impl RoleLabels {
    /// Labels with no entries; fill in with [`RoleLabels::with`].
    pub fn empty() -> Self {
        Self {
            system: None,
            human: None,
            ai: None,
        }
    }

    pub fn with(mut self, role: Role, label: impl Into<String>) -> Self {
        *self.slot(role) = Some(label.into());
        self
    }

    pub fn get(&self, role: Role) -> Option<&str> {
        match role {
            Role::System => self.system.as_deref(),
            Role::Human => self.human.as_deref(),
            Role::Ai => self.ai.as_deref(),
        }
    }

    fn slot(&mut self, role: Role) -> &mut Option<String> {
        match role {
            Role::System => &mut self.system,
            Role::Human => &mut self.human,
            Role::Ai => &mut self.ai,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no label configured for role {0}")]
pub struct MissingLabel(pub Role);

/// Renders messages as `"<label>: <content>"` lines joined with `\n`.
///
/// Content is inserted verbatim, so embedded newlines survive.
pub fn format_transcript(messages: &[Message], labels: &RoleLabels) -> Result<String, MissingLabel> {
    let mut out = String::new();
    for (i, message) in messages.iter().enumerate() {
        let label = labels.get(message.role).ok_or(MissingLabel(message.role))?;
        if i > 0 {
            out.push('\n');
        }
        out.push_str(label);
        out.push_str(": ");
        out.push_str(&message.content);
    }
    Ok(out)
}
