//! Prompt templates with `{name}` placeholders.
//!
//! Grammar: `{ident}` is a placeholder where `ident` matches
//! `[A-Za-z_][A-Za-z0-9_]*`; `{{` and `}}` produce literal braces. Anything
//! else involving a brace is a parse error. Substitution is single pass, so
//! binding values are inserted verbatim and never expanded again.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::messages::{Message, Role};

/// Values bound to placeholder names.
pub type Bindings = HashMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unbalanced brace at byte {offset}")]
    UnbalancedBrace { offset: usize },
    #[error("empty placeholder at byte {offset}")]
    EmptyPlaceholder { offset: usize },
    #[error("malformed placeholder name {name:?} at byte {offset}")]
    InvalidIdentifier { name: String, offset: usize },
    #[error("missing value for template variable {0:?}")]
    MissingVariable(String),
    #[error("chat prompt template needs at least one part")]
    EmptyChat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

/// Returns true if `name` is a valid placeholder identifier.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A parsed template. `variables` is exactly the set of placeholders in `source`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    source: String,
    segments: Vec<Segment>,
    variables: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut chars = source.char_indices().peekable();

        while let Some((offset, c)) = chars.next() {
            match c {
                '{' => {
                    if matches!(chars.peek(), Some((_, '{'))) {
                        chars.next();
                        literal.push('{');
                        continue;
                    }
                    let mut name = String::new();
                    let mut closed = false;
                    for (_, c) in chars.by_ref() {
                        match c {
                            '}' => {
                                closed = true;
                                break;
                            }
                            '{' => return Err(TemplateError::UnbalancedBrace { offset }),
                            c => name.push(c),
                        }
                    }
                    if !closed {
                        return Err(TemplateError::UnbalancedBrace { offset });
                    }
                    if name.is_empty() {
                        return Err(TemplateError::EmptyPlaceholder { offset });
                    }
                    if !is_identifier(&name) {
                        return Err(TemplateError::InvalidIdentifier { name, offset });
                    }
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Placeholder(name));
                }
                '}' => {
                    if matches!(chars.peek(), Some((_, '}'))) {
                        chars.next();
                        literal.push('}');
                    } else {
                        return Err(TemplateError::UnbalancedBrace { offset });
                    }
                }
                c => literal.push(c),
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }

        let variables = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(name) => Some(name.clone()),
                Segment::Literal(_) => None,
            })
            .collect();
        Ok(Self {
            source: source.to_string(),
            segments,
            variables,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &BTreeSet<String> {
        &self.variables
    }

    /// Number of times `name` appears as a placeholder.
    pub fn occurrences(&self, name: &str) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s, Segment::Placeholder(n) if n == name))
            .count()
    }

    /// Substitutes every placeholder. Unused bindings are ignored.
    pub fn render(&self, bindings: &Bindings) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Placeholder(name) => {
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| TemplateError::MissingVariable(name.clone()))?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

impl std::str::FromStr for PromptTemplate {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// A template that renders into a message with a fixed role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageTemplate {
    pub role: Role,
    pub template: PromptTemplate,
}

impl MessageTemplate {
    pub fn new(role: Role, template: PromptTemplate) -> Self {
        Self { role, template }
    }

    pub fn parse(role: Role, source: &str) -> Result<Self, TemplateError> {
        Ok(Self::new(role, PromptTemplate::parse(source)?))
    }

    pub fn render(&self, bindings: &Bindings) -> Result<Message, TemplateError> {
        Ok(Message::new(self.role, self.template.render(bindings)?))
    }
}

/// Ordered role-tagged templates rendered with one shared set of bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatPromptTemplate {
    parts: Vec<MessageTemplate>,
    variables: BTreeSet<String>,
}

impl ChatPromptTemplate {
    pub fn new(parts: Vec<MessageTemplate>) -> Result<Self, TemplateError> {
        if parts.is_empty() {
            return Err(TemplateError::EmptyChat);
        }
        let variables = parts
            .iter()
            .flat_map(|p| p.template.variables().iter().cloned())
            .collect();
        Ok(Self { parts, variables })
    }

    pub fn parts(&self) -> &[MessageTemplate] {
        &self.parts
    }

    pub fn variables(&self) -> &BTreeSet<String> {
        &self.variables
    }

    /// One message per part, in order.
    pub fn render(&self, bindings: &Bindings) -> Result<Vec<Message>, TemplateError> {
        self.parts.iter().map(|p| p.render(bindings)).collect()
    }
}
