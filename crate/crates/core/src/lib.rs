//! Conversational LLM orchestration: role-tagged messages, prompt templates,
//! chat-model backends, session memory and a single-turn chain, packaged
//! with an HTTP chat service and CLI for a mental-health assistant persona.
//!
//! This is a research artifact, not a medical device.

pub mod chain;
pub mod cli;
pub mod memory;
pub mod messages;
pub mod model_client;
pub mod persona;
pub mod prompting;
pub mod service;
pub mod transcript;

pub use chain::{build_chain, Chain, ChainError, ChainOutput};
pub use memory::{MemoryPolicy, MemoryState};
pub use messages::{Message, Role, Transcript};
pub use model_client::{ChatModel, CompletionRequest, ModelConfig, ModelError, RemoteBackend, ScriptedBackend};
pub use persona::{Persona, PersonaRegistry};
pub use prompting::{ChatPromptTemplate, MessageTemplate, PromptTemplate};
