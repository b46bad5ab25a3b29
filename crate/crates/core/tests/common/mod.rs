#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::http::{HeaderMap, HeaderName, HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::post;
use axum::Router;
use serde::Deserialize;

use mindguide::messages::Message;
use mindguide::model_client::{CompletionRequest, ModelConfig, ModelError};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wire")
}

#[derive(Debug, Deserialize)]
pub struct CaseMeta {
    pub description: String,
    pub config: ModelConfig,
    pub messages: Vec<Message>,
    pub status: u16,
    pub headers: BTreeMap<String, String>,
    pub expect: Expect,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Expect {
    Content { content: String },
    Error {
        error: String,
        message: Option<String>,
        retry_after_secs: Option<u64>,
    },
}

#[derive(Debug)]
pub struct WireCase {
    pub name: String,
    pub meta: CaseMeta,
    pub request_bytes: Vec<u8>,
    pub response_bytes: Vec<u8>,
}

impl WireCase {
    pub fn request(&self) -> CompletionRequest {
        CompletionRequest::new(self.meta.config.clone(), self.meta.messages.clone()).unwrap()
    }

    /// Checks a backend result against the expectation; `Err` describes the mismatch.
    pub fn check(&self, result: &Result<Message, ModelError>) -> Result<(), String> {
        match (&self.meta.expect, result) {
            (Expect::Content { content }, Ok(m)) if m == &Message::ai(content.clone()) => Ok(()),
            (Expect::Error { error, message, retry_after_secs }, Err(e)) if e.class() == error => {
                match (message, e) {
                    (Some(want), ModelError::Auth { message: got, .. } | ModelError::Api { message: got, .. })
                        if want != got =>
                    {
                        return Err(format!("{}: message {got:?} != {want:?}", self.name))
                    }
                    _ => {}
                }
                if let (Some(secs), ModelError::RateLimited { retry_after }) = (retry_after_secs, e) {
                    if *retry_after != Some(std::time::Duration::from_secs(*secs)) {
                        return Err(format!("{}: retry_after {retry_after:?} != {secs}s", self.name));
                    }
                }
                Ok(())
            }
            (want, got) => Err(format!("{}: expected {want:?}, got {got:?}", self.name)),
        }
    }
}

pub fn load_cases() -> Vec<WireCase> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|dir| {
            let meta: CaseMeta =
                serde_json::from_str(&std::fs::read_to_string(dir.join("case.json")).unwrap()).unwrap();
            WireCase {
                name: dir.file_name().unwrap().to_string_lossy().into_owned(),
                meta,
                request_bytes: std::fs::read(dir.join("request.json")).unwrap(),
                response_bytes: std::fs::read(dir.join("response.json")).unwrap(),
            }
        })
        .collect()
}

/// What the fixture server saw.
#[derive(Debug, Clone, Default)]
pub struct Captured {
    pub authorization: Option<String>,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

/// Serves one canned response at `/v1/chat/completions` and records requests.
pub struct FixtureServer {
    pub addr: SocketAddr,
    pub captured: Arc<Mutex<Vec<Captured>>>,
    handle: tokio::task::JoinHandle<()>,
}

impl FixtureServer {
    pub async fn start(status: u16, headers: BTreeMap<String, String>, body: Vec<u8>) -> Self {
        let captured = Arc::new(Mutex::new(Vec::new()));
        let seen = captured.clone();
        let handler = move |req_headers: HeaderMap, req_body: Bytes| {
            let seen = seen.clone();
            let headers = headers.clone();
            let body = body.clone();
            async move {
                seen.lock().unwrap().push(Captured {
                    authorization: req_headers
                        .get("authorization")
                        .map(|v| v.to_str().unwrap().to_string()),
                    content_type: req_headers
                        .get("content-type")
                        .map(|v| v.to_str().unwrap().to_string()),
                    body: req_body.to_vec(),
                });
                let mut out = HeaderMap::new();
                for (k, v) in &headers {
                    out.insert(
                        HeaderName::from_bytes(k.as_bytes()).unwrap(),
                        HeaderValue::from_str(v).unwrap(),
                    );
                }
                (StatusCode::from_u16(status).unwrap(), out, body).into_response()
            }
        };
        let app = Router::new().route("/v1/chat/completions", post(handler));
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Self { addr, captured, handle }
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}
