//! Session-scoped HTTP chat service.
//!
//! Endpoints:
//!
//! | method | path | success |
//! |---|---|---|
//! | POST | `/api/sessions` | 201 `{session_id, welcome}` |
//! | POST | `/api/sessions/{id}/messages` | 200 `{reply}` |
//! | GET | `/api/sessions/{id}/history` | 200 `{messages}` |
//! | DELETE | `/api/sessions/{id}` | 204 |
//!
//! Each session appends to `<transcript_dir>/<session_id>.jsonl`.

mod config;
mod http;
mod session;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

pub use config::{BackendConfig, ServiceConfig, ServiceConfigError, CONFIG_ENV};
pub use http::{router, ApiError};
pub use session::{ChatService, CreatedSession, ServiceError, SessionInfo};

use crate::persona::{PersonaError, PersonaRegistry};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ServiceConfigError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Server(#[source] std::io::Error),
}

/// Builds the service described by `config`: validates it, creates
/// directories, loads personas and constructs the backend.
pub fn build_service(config: &ServiceConfig) -> Result<Arc<ChatService>, ServeError> {
    config.prepare()?;
    let personas = match &config.persona_dir {
        Some(dir) => PersonaRegistry::load_dir(dir)?,
        None => PersonaRegistry::default(),
    };
    let backend = config.build_backend()?;
    Ok(Arc::new(ChatService::new(
        personas,
        backend,
        config.model.clone(),
        config.memory,
        config.transcript_dir.clone(),
        config.session_ttl(),
    )))
}

/// Binds the configured address; split from [`serve_on`] so callers can
/// report bind failures separately.
pub async fn bind(config: &ServiceConfig) -> Result<tokio::net::TcpListener, ServeError> {
    let addr = format!("{}:{}", config.host, config.port);
    tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

/// Serves until `shutdown` resolves, sweeping idle sessions once a minute.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    service: Arc<ChatService>,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let app = router(service.clone(), config.static_dir.as_deref());
    let local: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(addr = ?local, "listening");

    let sweep_every = config.session_ttl().min(Duration::from_secs(60));
    let sweeper = tokio::spawn(async move {
        let mut tick = tokio::time::interval(sweep_every);
        tick.tick().await;
        loop {
            tick.tick().await;
            let expired = service.expire_idle();
            if expired > 0 {
                tracing::info!(expired, "expired idle sessions");
            }
        }
    });
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(ServeError::Server);
    sweeper.abort();
    result
}
