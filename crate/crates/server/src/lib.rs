//! HTTP transport for dialogue sessions.
//!
//! | method | path                         | body / reply                                 |
//! |--------|------------------------------|----------------------------------------------|
//! | POST   | `/sessions`                  | `{config?}` → `{session}`                    |
//! | POST   | `/utterances`                | `{session, utterance}` → `[event]`           |
//! | GET    | `/sessions/{id}/state`       | session state                                |
//! | GET    | `/sessions/{id}/events`      | SSE stream of events; `?since=<seq>` replays |
//! | GET    | `/health`                    | `ok`                                         |
//!
//! Paths sit under a configurable prefix (`/api` by default). Events are
//! `{type, payload, seq}` records; errors are `{error, detail}`.

use std::convert::Infallible;
use std::net::IpAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Parser;
use futures::Stream;
use psa_core::interpreter::Pacing;
use psa_core::service::{ErrorBody, EventRecord, ServiceError, SessionManager, SessionState};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

#[derive(Debug, Clone, Parser)]
#[command(name = "psa-server", version, about = "Serve PSA dialogue sessions over HTTP")]
pub struct Settings {
    #[arg(long, env = "PSA_BIND", default_value = "127.0.0.1")]
    pub bind: IpAddr,
    #[arg(long, env = "PSA_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Route prefix, e.g. `/api` or `/`.
    #[arg(long, env = "PSA_PREFIX", default_value = "/api")]
    pub prefix: String,
    /// Default world configuration (TOML) for new sessions.
    #[arg(long, env = "PSA_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// `instant` or `scaled:<rate>`.
    #[arg(long, env = "PSA_PACING", default_value = "scaled:1", value_parser = parse_pacing)]
    pub pacing: Pacing,
    /// Allow cross-origin requests from any origin.
    #[arg(long, env = "PSA_CORS")]
    pub cors: bool,
}

fn parse_pacing(s: &str) -> Result<Pacing, String> {
    Pacing::parse(s).map_err(|e| e.to_string())
}

pub struct ApiError(StatusCode, ErrorBody);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match e {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::EmptyUtterance => StatusCode::BAD_REQUEST,
            ServiceError::InvalidConfig { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.body())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(e.status(), ErrorBody { error: "malformed_request".into(), detail: e.body_text() })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type AppState = Arc<SessionManager>;

#[derive(Debug, Default, Deserialize)]
pub struct CreateSession {
    /// World configuration (TOML) for this session only.
    pub config: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Utterance {
    pub session: String,
    pub utterance: String,
}

#[derive(Debug, Default, Deserialize)]
pub struct Since {
    pub since: Option<u64>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.expect("session call panicked").map_err(ApiError::from)
}

async fn create_session(
    State(manager): State<AppState>,
    body: Option<Json<CreateSession>>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let config = body.and_then(|Json(b)| b.config);
    let session = blocking(move || manager.create_session_with(config.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(Created { session })))
}

async fn post_utterance(
    State(manager): State<AppState>,
    body: Result<Json<Utterance>, JsonRejection>,
) -> Result<Json<Vec<EventRecord>>, ApiError> {
    let Json(Utterance { session, utterance }) = body?;
    let events = blocking(move || manager.post_utterance(&session, &utterance)).await?;
    Ok(Json(events))
}

async fn get_state(State(manager): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    Ok(Json(blocking(move || manager.get_state(&id)).await?))
}

fn sse_event(record: &EventRecord) -> Result<Event, Infallible> {
    Ok(Event::default().id(record.seq.to_string()).json_data(record).expect("events serialize"))
}

async fn events(
    State(manager): State<AppState>,
    Path(id): Path<String>,
    Query(Since { since }): Query<Since>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let live = manager.subscribe(&id)?;
    let backlog: Vec<EventRecord> = match since {
        Some(since) => manager.events(&id)?.into_iter().filter(|e| e.seq > since).collect(),
        None => Vec::new(),
    };
    let mut last = backlog.last().map(|e| e.seq).or(since).unwrap_or(0);
    let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
    for record in backlog {
        let _ = tx.send(record);
    }
    std::thread::spawn(move || {
        for record in live {
            if record.seq <= last {
                continue;
            }
            last = record.seq;
            if tx.send(record).is_err() {
                break;
            }
        }
    });
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let record = rx.recv().await?;
        Some((sse_event(&record), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// The application routes under `prefix`.
pub fn router(manager: Arc<SessionManager>, prefix: &str, cors: bool) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/utterances", post(post_utterance))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/events", get(events))
        .route("/health", get(|| async { "ok" }))
        .with_state(manager);
    let prefix = prefix.trim_end_matches('/');
    let app = if prefix.is_empty() { api } else { Router::new().nest(prefix, api) };
    if cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Builds the session manager described by `settings`.
pub fn manager(settings: &Settings) -> Result<SessionManager, String> {
    let manager = match &settings.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            SessionManager::with_config(&text).map_err(|e| e.to_string())?
        }
        None => SessionManager::new(),
    };
    Ok(manager.with_pacing(settings.pacing))
}
