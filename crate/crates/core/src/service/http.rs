//! JSON routes under `/api`.

use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use super::session::{ChatService, ServiceError};
use crate::messages::Message;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionBody {
    persona_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PostMessageBody {
    content: String,
}

#[derive(Debug, Serialize)]
struct CreatedBody {
    session_id: String,
    welcome: Message,
}

#[derive(Debug, Serialize)]
struct ReplyBody {
    reply: Message,
}

#[derive(Debug, Serialize)]
struct HistoryBody {
    messages: Vec<Message>,
}

/// Error responses: `{"error": {"code", "message"}}`, plus `class` for
/// upstream failures.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    class: Option<&'static str>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
            class: None,
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        let status = match &err {
            ServiceError::UnknownSession(_) | ServiceError::UnknownPersona(_) => StatusCode::NOT_FOUND,
            ServiceError::EmptyMessage => StatusCode::BAD_REQUEST,
            ServiceError::SessionBusy => StatusCode::CONFLICT,
            ServiceError::Upstream(_) => StatusCode::BAD_GATEWAY,
            ServiceError::InvalidPersona { .. } | ServiceError::Transcript(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %err, "request failed");
        }
        let class = match &err {
            ServiceError::Upstream(e) => Some(e.class()),
            _ => None,
        };
        Self {
            status,
            code: err.code(),
            message: err.to_string(),
            class,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(class) = self.class {
            error["class"] = json!(class);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn create_session(State(svc): State<Arc<ChatService>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSessionBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSessionBody::default()
    } else {
        parse_body(&body)?
    };
    let created = svc.create_session(req.persona_id.as_deref())?;
    let body = CreatedBody {
        session_id: created.session_id,
        welcome: created.welcome,
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn post_message(
    State(svc): State<Arc<ChatService>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<ReplyBody>, ApiError> {
    let req: PostMessageBody = parse_body(&body)?;
    let reply = svc.post_message(&id, &req.content).await?;
    Ok(Json(ReplyBody { reply }))
}

async fn get_history(
    State(svc): State<Arc<ChatService>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<HistoryBody>, ApiError> {
    let messages = svc.get_history(&id).await?;
    Ok(Json(HistoryBody { messages }))
}

async fn delete_session(State(svc): State<Arc<ChatService>>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    svc.delete_session(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

/// API routes, optionally with static UI assets served as the fallback.
pub fn router(service: Arc<ChatService>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/history", get(get_history))
        .route("/api/sessions/{id}", delete(delete_session))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}
