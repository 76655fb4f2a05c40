//! Local HTTP + WebSocket service for interactive sessions.
//!
//! Every session owns a network on its own thread; handlers talk to it
//! through a command channel, so requests never share simulation state.

pub mod protocol;
mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::sync::{mpsc::unbounded_channel, oneshot};

use crate::analysis::DEFAULT_WINDOW_MS;
use crate::diagnostics::Diagnostic;
use crate::engine::export::events_ndjson;
use crate::engine::{validate, Network, NetworkSpec};
use crate::error::SnnError;
use crate::experiments::{catalog, preset};

use protocol::{
    ClientMessage, CreateSession, ErrorBody, ParamPatch, RunRequest, ServerMessage, ValidationReport,
    DEFAULT_DECIMATION,
};
use session::Command;

/// Error response: status code plus `{error, diagnostics}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: message.into(),
                diagnostics: Vec::new(),
            },
        }
    }

    pub(crate) fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub(crate) fn invalid(message: impl Into<String>, diagnostics: Vec<Diagnostic>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: message.into(),
                diagnostics,
            },
        }
    }

    pub(crate) fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session `{id}`"))
    }

    fn gone() -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "session worker stopped")
    }
}

impl From<SnnError> for ApiError {
    fn from(e: SnnError) -> Self {
        match e {
            SnnError::Validation(diags) => ApiError::invalid("spec failed validation", diags),
            SnnError::UnknownPreset { .. } => ApiError::new(StatusCode::NOT_FOUND, e.to_string()),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::Sender<Command>,
}

impl SessionHandle {
    async fn request<T>(&self, make: impl FnOnce(oneshot::Sender<ApiResult<T>>) -> Command) -> ApiResult<T> {
        let (tx, rx) = oneshot::channel();
        self.commands.send(make(tx)).map_err(|_| ApiError::gone())?;
        rx.await.map_err(|_| ApiError::gone())?
    }
}

#[derive(Clone, Default)]
struct AppState {
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
}

impl AppState {
    fn get(&self, id: &str) -> ApiResult<SessionHandle> {
        self.sessions
            .lock()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }
}

/// The service's routes.
pub fn router() -> Router {
    Router::new()
        .route("/presets", get(list_presets))
        .route("/validate", post(validate_spec))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_info).delete(delete_session))
        .route("/sessions/{id}/run", post(run_session))
        .route("/sessions/{id}/pause", post(pause_session))
        .route("/sessions/{id}/params", axum::routing::patch(patch_params))
        .route("/sessions/{id}/stats", get(session_stats))
        .route("/sessions/{id}/recording", get(session_recording))
        .route("/sessions/{id}/stream", get(session_stream))
        .with_state(AppState::default())
}

/// Serves on an already-bound listener until the process ends.
pub async fn serve(listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Binds `host:port` and serves on a fresh runtime until interrupted.
pub fn serve_blocking(host: &str, port: u16) -> crate::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on http://{addr}");
        axum::serve(listener, router())
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn resolve_spec(body: &[u8]) -> ApiResult<NetworkSpec> {
    let req: CreateSession = parse_json(body)?;
    match (req.spec, req.preset) {
        (Some(spec), None) => Ok(spec),
        (None, Some(name)) => Ok(preset(&name)?.spec),
        _ => Err(ApiError::bad_request("give exactly one of `spec` or `preset`")),
    }
}

async fn list_presets() -> Json<serde_json::Value> {
    Json(serde_json::to_value(catalog()).expect("presets serialize"))
}

async fn validate_spec(body: Bytes) -> ApiResult<Json<ValidationReport>> {
    let spec = resolve_spec(&body)?;
    let diagnostics = validate(&spec);
    Ok(Json(ValidationReport {
        valid: !diagnostics.iter().any(Diagnostic::is_error),
        diagnostics,
    }))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let spec = resolve_spec(&body)?;
    let network = Network::new(&spec)?;
    let id = format!("{:016x}", rand::random::<u64>());
    let (commands, _thread) = session::spawn(id.clone(), network).map_err(ApiError::from)?;
    let handle = SessionHandle { commands };
    let info = handle.request(Command::Info).await?;
    app.sessions.lock().expect("session table").insert(id, handle);
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn list_sessions(State(app): State<AppState>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = app.sessions.lock().expect("session table").keys().cloned().collect();
    ids.sort();
    Json(ids)
}

async fn session_info(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let info = app.get(&id)?.request(Command::Info).await?;
    Ok(Json(info).into_response())
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let handle = app
        .sessions
        .lock()
        .expect("session table")
        .remove(&id)
        .ok_or_else(|| ApiError::not_found(&id))?;
    let _ = handle.commands.send(Command::Close);
    Ok(StatusCode::NO_CONTENT)
}

async fn run_session(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let handle = app.get(&id)?;
    let req: RunRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RunRequest::default()
    } else {
        parse_json(&body)?
    };
    let info = handle
        .request(|reply| Command::Run {
            until_ms: req.until_ms,
            reply,
        })
        .await?;
    Ok(Json(info).into_response())
}

async fn pause_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let info = app.get(&id)?.request(Command::Pause).await?;
    Ok(Json(info).into_response())
}

async fn patch_params(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let handle = app.get(&id)?;
    let params: ParamPatch = parse_json(&body)?;
    let info = handle.request(|reply| Command::Patch { params, reply }).await?;
    Ok(Json(info).into_response())
}

#[derive(Deserialize)]
struct StatsQuery {
    window_ms: Option<f64>,
}

async fn session_stats(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StatsQuery>,
) -> ApiResult<Response> {
    let handle = app.get(&id)?;
    let window_ms = q.window_ms.unwrap_or(DEFAULT_WINDOW_MS);
    let stats = handle.request(|reply| Command::Stats { window_ms, reply }).await?;
    Ok(Json(stats).into_response())
}

#[derive(Deserialize)]
struct RecordingQuery {
    format: Option<String>,
}

async fn session_recording(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RecordingQuery>,
) -> ApiResult<Response> {
    let handle = app.get(&id)?;
    let rec = handle.request(Command::Recording).await?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok(([(header::CONTENT_TYPE, "application/json")], rec.to_json()).into_response()),
        "ndjson" => Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], events_ndjson(&rec)).into_response()),
        other => Err(ApiError::bad_request(format!(
            "unknown recording format `{other}`; use json or ndjson"
        ))),
    }
}

#[derive(Deserialize)]
struct StreamQuery {
    decimation: Option<u64>,
}

async fn session_stream(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StreamQuery>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let handle = app.get(&id)?;
    let (sink, frames) = unbounded_channel();
    let decimation = q.decimation.unwrap_or(DEFAULT_DECIMATION);
    let subscriber = handle
        .request(|reply| Command::Subscribe {
            decimation,
            sink,
            reply,
        })
        .await?;
    Ok(ws.on_upgrade(move |socket| pump(socket, frames, handle, subscriber)))
}

async fn pump(
    socket: WebSocket,
    mut frames: tokio::sync::mpsc::UnboundedReceiver<ServerMessage>,
    handle: SessionHandle,
    subscriber: u64,
) {
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            message = frames.recv() => {
                let Some(message) = message else { break };
                let closing = matches!(message, ServerMessage::Closed { .. });
                let text = serde_json::to_string(&message).expect("messages serialize");
                if tx.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
                if closing {
                    let _ = tx.send(Message::Close(None)).await;
                    return;
                }
            }
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
                    Ok(m) => {
                        let _ = handle.commands.send(Command::SetDecimation { subscriber, decimation: m.decimation });
                    }
                    Err(e) => {
                        let reply = ServerMessage::Error { message: format!("unrecognized message: {e}") };
                        let text = serde_json::to_string(&reply).expect("messages serialize");
                        if tx.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                },
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            }
        }
    }
    let _ = handle.commands.send(Command::Unsubscribe(subscriber));
}
