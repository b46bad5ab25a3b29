//! The single-turn LLM chain: prompt template + model backend + memory.
//!
//! One [`Chain::run`] does exactly: load memory, render the prompt, call the
//! backend, and only on success save the exchange. A failed run leaves memory
//! untouched.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::memory::{MemoryPolicy, MemoryState};
use crate::messages::{format_transcript, Message, Role, RoleLabels};
use crate::model_client::{ChatModel, CompletionRequest, ModelConfig, ModelError};
use crate::persona::Persona;
use crate::prompting::{Bindings, ChatPromptTemplate, MessageTemplate, TemplateError};

pub const DEFAULT_INPUT_KEY: &str = "question";
pub const DEFAULT_OUTPUT_KEY: &str = "reply";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("template variable {0:?} is neither the input key nor the memory key")]
    UnboundVariable(String),
    #[error("human template must contain {{{key}}} exactly once, found {count}")]
    InputPlaceholder { key: String, count: usize },
    #[error("last prompt part must be a human template, found {0}")]
    LastPartNotHuman(Role),
    #[error("invalid template: {0}")]
    Template(#[from] TemplateError),
    #[error("invalid model config: {0}")]
    Config(#[from] crate::model_client::ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub reply: Message,
    /// Exactly what was sent to the backend.
    pub rendered_prompt: Vec<Message>,
}

pub struct Chain {
    prompt: ChatPromptTemplate,
    backend: Arc<dyn ChatModel>,
    config: ModelConfig,
    memory: MemoryState,
    policy: MemoryPolicy,
    input_key: String,
    output_key: String,
}

impl std::fmt::Debug for Chain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Chain")
            .field("prompt", &self.prompt)
            .field("config", &self.config)
            .field("memory", &self.memory)
            .field("policy", &self.policy)
            .field("input_key", &self.input_key)
            .field("output_key", &self.output_key)
            .finish_non_exhaustive()
    }
}

impl Chain {
    /// Validates that every template variable is the input key or the memory
    /// key, and that the prompt ends with a human part.
    pub fn new(
        prompt: ChatPromptTemplate,
        backend: Arc<dyn ChatModel>,
        config: ModelConfig,
        memory: MemoryState,
        policy: MemoryPolicy,
    ) -> Result<Self, ChainError> {
        config.validate()?;
        let input_key = DEFAULT_INPUT_KEY.to_string();
        if let Some(unbound) = prompt
            .variables()
            .iter()
            .find(|v| **v != input_key && *v != memory.memory_key())
        {
            return Err(ChainError::UnboundVariable(unbound.clone()));
        }
        let last = prompt.parts().last().expect("chat prompt is non-empty").role;
        if last != Role::Human {
            return Err(ChainError::LastPartNotHuman(last));
        }
        Ok(Self {
            prompt,
            backend,
            config,
            memory,
            policy,
            input_key,
            output_key: DEFAULT_OUTPUT_KEY.to_string(),
        })
    }

    pub fn prompt(&self) -> &ChatPromptTemplate {
        &self.prompt
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn memory(&self) -> &MemoryState {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut MemoryState {
        &mut self.memory
    }

    pub fn policy(&self) -> MemoryPolicy {
        self.policy
    }

    pub fn input_key(&self) -> &str {
        &self.input_key
    }

    pub fn output_key(&self) -> &str {
        &self.output_key
    }

    /// `{output_key: reply content}`.
    pub fn output_values(&self, output: &ChainOutput) -> HashMap<String, String> {
        HashMap::from([(self.output_key.clone(), output.reply.content.clone())])
    }

    /// Renders the messages for `input` against the current memory.
    ///
    /// If a template references the memory key, history is bound there as
    /// labelled text. Otherwise history messages are spliced in before the
    /// final human part.
    pub fn render_prompt(&self, input: &str) -> Result<Vec<Message>, ChainError> {
        let loaded = self.memory.load(self.policy);
        let key = self.memory.memory_key();
        let history = loaded.get(key).cloned().unwrap_or_default();

        let mut bindings = Bindings::new();
        bindings.insert(self.input_key.clone(), input.to_string());
        let as_text = self.prompt.variables().contains(key);
        if as_text {
            let text = format_transcript(&history, &RoleLabels::default()).expect("default labels cover all roles");
            bindings.insert(key.to_string(), text);
        }

        let parts = self.prompt.parts();
        let (head, last) = parts.split_at(parts.len() - 1);
        let mut messages = Vec::with_capacity(parts.len() + history.len());
        for part in head {
            messages.push(part.render(&bindings)?);
        }
        if !as_text {
            messages.extend(history);
        }
        messages.push(last[0].render(&bindings)?);
        Ok(messages)
    }

    pub async fn run(&mut self, input: &str) -> Result<ChainOutput, ChainError> {
        let rendered_prompt = self.render_prompt(input)?;
        let request = CompletionRequest::new(self.config.clone(), rendered_prompt.clone())
            .expect("rendered prompt has at least the human part");
        let reply = self.backend.complete(&request).await?;
        let reply = Message::ai(reply.content);
        self.memory.save(input, reply.content.clone());
        Ok(ChainOutput {
            reply,
            rendered_prompt,
        })
    }
}

/// Builds a chain for `persona`: `[System(system_template), Human(human_template)]`
/// with fresh memory whose preamble is the persona's welcome.
pub fn build_chain(
    persona: &Persona,
    backend: Arc<dyn ChatModel>,
    config: ModelConfig,
    policy: MemoryPolicy,
) -> Result<Chain, ChainError> {
    let system = MessageTemplate::parse(Role::System, &persona.system_template)?;
    let human = MessageTemplate::parse(Role::Human, &persona.human_template)?;
    let count = human.template.occurrences(DEFAULT_INPUT_KEY);
    let prompt = ChatPromptTemplate::new(vec![system, human])?;
    let memory = MemoryState::new()
        .with_preamble(Message::ai(persona.welcome.clone()))
        .expect("welcome is an AI message");
    let chain = Chain::new(prompt, backend, config, memory, policy)?;
    if count != 1 {
        return Err(ChainError::InputPlaceholder {
            key: DEFAULT_INPUT_KEY.to_string(),
            count,
        });
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_client::ScriptedBackend;

    fn persona(system: &str, human: &str) -> Persona {
        Persona {
            id: "t".into(),
            system_template: system.into(),
            human_template: human.into(),
            welcome: "welcome".into(),
        }
    }

    fn chain_with(p: &Persona, replies: &[&str]) -> (Chain, Arc<ScriptedBackend>) {
        let backend = Arc::new(ScriptedBackend::new(replies.iter().copied()));
        let mut chain = build_chain(p, backend.clone(), ModelConfig::default(), MemoryPolicy::Buffer).unwrap();
        chain.memory = MemoryState::new();
        (chain, backend)
    }

    #[tokio::test]
    async fn first_and_second_run() {
        let (mut chain, backend) = chain_with(&persona("persona", "{question}"), &["ACK", "ACK2"]);
        let out = chain.run("hi").await.unwrap();
        assert_eq!(out.reply, Message::ai("ACK"));
        assert_eq!(out.rendered_prompt, vec![Message::system("persona"), Message::human("hi")]);
        assert_eq!(chain.memory().exchanges().len(), 1);
        assert_eq!(chain.output_values(&out)["reply"], "ACK");

        chain.run("again").await.unwrap();
        let calls = backend.calls_seen();
        assert_eq!(
            calls[1].messages(),
            &[
                Message::system("persona"),
                Message::human("hi"),
                Message::ai("ACK"),
                Message::human("again")
            ]
        );
    }

    #[tokio::test]
    async fn failure_leaves_memory_untouched() {
        let (mut chain, _) = chain_with(&persona("persona", "{question}"), &[]);
        let err = chain.run("hi").await.unwrap_err();
        assert_eq!(err, ChainError::Model(ModelError::ScriptExhausted));
        assert!(chain.memory().exchanges().is_empty());
    }

    #[tokio::test]
    async fn welcome_preamble_is_sent() {
        let backend = Arc::new(ScriptedBackend::new(["r"]));
        let mut chain = build_chain(&Persona::mindguide(), backend.clone(), ModelConfig::default(), MemoryPolicy::Buffer)
            .unwrap();
        let out = chain.run("I feel anxious").await.unwrap();
        assert_eq!(out.rendered_prompt.len(), 3);
        assert!(out.rendered_prompt[0]
            .content
            .contains("compassionate and experienced mental health therapist"));
        assert_eq!(out.rendered_prompt[1].role, Role::Ai);
        assert!(out.rendered_prompt[1].content.starts_with("Welcome! to your therapy session"));
        assert_eq!(out.rendered_prompt[2], Message::human("I feel anxious"));
    }

    #[test]
    fn build_validation() {
        let backend: Arc<dyn ChatModel> = Arc::new(ScriptedBackend::default());
        let ok = build_chain(&persona("s", "{question}"), backend.clone(), ModelConfig::default(), MemoryPolicy::Buffer);
        assert!(ok.is_ok());
        let err = build_chain(
            &persona("s", "{question} {mood}"),
            backend.clone(),
            ModelConfig::default(),
            MemoryPolicy::Buffer,
        )
        .unwrap_err();
        assert_eq!(err, ChainError::UnboundVariable("mood".into()));
        let err = build_chain(&persona("s", "no input"), backend.clone(), ModelConfig::default(), MemoryPolicy::Buffer)
            .unwrap_err();
        assert_eq!(err, ChainError::InputPlaceholder { key: "question".into(), count: 0 });
        let err = build_chain(
            &persona("s", "{question}{question}"),
            backend.clone(),
            ModelConfig::default(),
            MemoryPolicy::Buffer,
        )
        .unwrap_err();
        assert_eq!(err, ChainError::InputPlaceholder { key: "question".into(), count: 2 });
        assert!(matches!(
            build_chain(&persona("{", "{question}"), backend.clone(), ModelConfig::default(), MemoryPolicy::Buffer),
            Err(ChainError::Template(_))
        ));
        let hot = ModelConfig { temperature: 3.0, ..Default::default() };
        assert!(matches!(
            build_chain(&persona("s", "{question}"), backend, hot, MemoryPolicy::Buffer),
            Err(ChainError::Config(_))
        ));
    }

    #[test]
    fn last_part_must_be_human() {
        let prompt = ChatPromptTemplate::new(vec![
            MessageTemplate::parse(Role::Human, "{question}").unwrap(),
            MessageTemplate::parse(Role::System, "s").unwrap(),
        ])
        .unwrap();
        let err = Chain::new(
            prompt,
            Arc::new(ScriptedBackend::default()),
            ModelConfig::default(),
            MemoryState::new(),
            MemoryPolicy::Buffer,
        )
        .unwrap_err();
        assert_eq!(err, ChainError::LastPartNotHuman(Role::System));
    }

    #[tokio::test]
    async fn history_as_text_variable() {
        let p = persona("Conversation so far:\n{history}", "{question}");
        let (mut chain, _) = chain_with(&p, &["one", "two"]);
        chain.run("a").await.unwrap();
        let out = chain.run("b").await.unwrap();
        assert_eq!(
            out.rendered_prompt,
            vec![
                Message::system("Conversation so far:\nHuman: a\nAI: one"),
                Message::human("b")
            ]
        );
    }

    #[tokio::test]
    async fn window_policy_limits_history() {
        let backend = Arc::new(ScriptedBackend::new(["1", "2", "3"]));
        let mut chain = Chain::new(
            ChatPromptTemplate::new(vec![
                MessageTemplate::parse(Role::System, "s").unwrap(),
                MessageTemplate::parse(Role::Human, "{question}").unwrap(),
            ])
            .unwrap(),
            backend.clone(),
            ModelConfig::default(),
            MemoryState::new(),
            MemoryPolicy::window(1).unwrap(),
        )
        .unwrap();
        for q in ["a", "b", "c"] {
            chain.run(q).await.unwrap();
        }
        assert_eq!(
            backend.calls_seen()[2].messages(),
            &[Message::system("s"), Message::human("b"), Message::ai("2"), Message::human("c")]
        );
        assert_eq!(chain.memory().exchanges().len(), 3);
    }
}
