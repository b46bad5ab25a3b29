//! Chat-completions request/response encoding.

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, ModelError};
use crate::messages::{Message, Role};

/// Wire name for a role: System→`system`, Human→`user`, AI→`assistant`.
pub fn role_to_wire(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::Human => "user",
        Role::Ai => "assistant",
    }
}

pub fn role_from_wire(name: &str) -> Option<Role> {
    match name {
        "system" => Some(Role::System),
        "user" => Some(Role::Human),
        "assistant" => Some(Role::Ai),
        _ => None,
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    messages: Vec<WireMessageOut<'a>>,
}

#[derive(Serialize)]
struct WireMessageOut<'a> {
    role: &'static str,
    content: &'a str,
}

/// Serializes a request into the JSON body sent to the endpoint.
///
/// Key order is fixed: `model`, `temperature`, `max_tokens` (only when set),
/// `messages`.
pub fn encode_request(request: &CompletionRequest) -> Vec<u8> {
    let config = request.config();
    let body = RequestBody {
        model: &config.model_name,
        temperature: config.temperature,
        max_tokens: config.max_tokens,
        messages: request
            .messages()
            .iter()
            .map(|m| WireMessageOut {
                role: role_to_wire(m.role),
                content: &m.content,
            })
            .collect(),
    };
    serde_json::to_vec(&body).expect("request body serializes")
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Option<Vec<Choice>>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<WireMessageIn>,
}

#[derive(Deserialize)]
struct WireMessageIn {
    content: Option<String>,
}

/// Extracts the first choice's content as an AI message.
pub fn decode_response(bytes: &[u8]) -> Result<Message, ModelError> {
    let body: ResponseBody =
        serde_json::from_slice(bytes).map_err(|e| ModelError::MalformedResponse(format!("invalid JSON: {e}")))?;
    let choices = body
        .choices
        .ok_or_else(|| ModelError::MalformedResponse("missing `choices`".into()))?;
    let first = choices
        .into_iter()
        .next()
        .ok_or_else(|| ModelError::MalformedResponse("empty `choices`".into()))?;
    let content = first
        .message
        .ok_or_else(|| ModelError::MalformedResponse("choice has no `message`".into()))?
        .content
        .ok_or_else(|| ModelError::MalformedResponse("message has no `content`".into()))?;
    Ok(Message::ai(content))
}

#[derive(Deserialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Deserialize)]
struct ErrorDetail {
    message: Option<String>,
}

/// Best-effort extraction of `error.message` from a non-success body.
pub fn decode_error_message(bytes: &[u8]) -> String {
    match serde_json::from_slice::<ErrorBody>(bytes) {
        Ok(ErrorBody { error: ErrorDetail { message: Some(m) } }) => m,
        _ => String::from_utf8_lossy(bytes).chars().take(200).collect(),
    }
}
