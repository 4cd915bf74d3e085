//! WebSocket front end for running studies.
//!
//! * `GET /ws`: one participant per connection, speaking the JSON envelope
//!   protocol from [`debtlab::storage::wire`].
//! * `GET /health`: liveness plus the study id.
//! * `GET /sessions`: read-only progress of every session.
//!
//! Each session sits behind its own lock, so messages for one participant
//! are handled in arrival order while sessions proceed in parallel.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use debtlab::session::{Study, StudyConfig};
use debtlab::storage::{Clock, Envelope, ErrorCode, Message, SessionChannel, StudyDir, StudyHost, SystemClock};
use debtlab::StorageError;
use serde_json::json;
use tokio::net::TcpListener;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Serve(#[source] std::io::Error),
}

type Channel = Arc<tokio::sync::Mutex<SessionChannel>>;

struct AppState {
    config: StudyConfig,
    dir: StudyDir,
    study: Mutex<Study>,
    sessions: Mutex<HashMap<String, Channel>>,
    clock: Arc<dyn Clock>,
}

/// A study ready to serve. Opening recovers any sessions already logged
/// in the data directory.
#[derive(Clone)]
pub struct Service {
    state: Arc<AppState>,
}

impl Service {
    pub fn open(config: StudyConfig, data_dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        Self::open_with_clock(config, data_dir, Arc::new(SystemClock))
    }

    pub fn open_with_clock(config: StudyConfig, data_dir: impl Into<PathBuf>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let dir = StudyDir::new(data_dir);
        dir.init(&config)?;
        let (study, _, channels) = StudyHost::recover(dir.clone(), true)?.into_parts();
        let sessions = channels
            .into_iter()
            .map(|(pid, c)| (pid, Arc::new(tokio::sync::Mutex::new(c))))
            .collect();
        Ok(Service {
            state: Arc::new(AppState {
                config,
                dir,
                study: Mutex::new(study),
                sessions: Mutex::new(sessions),
                clock,
            }),
        })
    }

    pub fn study_id(&self) -> &str {
        &self.state.config.study_id
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/health", get(health))
            .route("/sessions", get(sessions))
            .route("/ws", get(ws_upgrade))
            .with_state(Arc::clone(&self.state))
    }

    /// Serves until `shutdown` resolves, then flushes every session log.
    pub async fn run(self, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        if let Ok(addr) = listener.local_addr() {
            tracing::info!(%addr, study = %self.study_id(), "serving");
        }
        axum::serve(listener, self.router())
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(ServiceError::Serve)?;
        self.flush().await
    }

    /// Forces every session log to disk.
    pub async fn flush(&self) -> Result<(), ServiceError> {
        let channels: Vec<Channel> = self.state.sessions.lock().expect("session map lock").values().cloned().collect();
        for c in channels {
            c.lock().await.sync_log()?;
        }
        tracing::info!("session logs flushed");
        Ok(())
    }
}

/// Binds `addr`, reporting the address in the error.
pub async fn bind(addr: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind {
        addr: addr.to_string(),
        source,
    })
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

async fn health(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    Json(json!({ "status": "ok", "study_id": state.config.study_id }))
}

async fn sessions(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let channels: Vec<(String, Channel)> = {
        let map = state.sessions.lock().expect("session map lock");
        let mut v: Vec<_> = map.iter().map(|(k, c)| (k.clone(), Arc::clone(c))).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let mut rows = Vec::with_capacity(channels.len());
    for (participant_id, channel) in channels {
        let channel = channel.lock().await;
        let session = channel.session();
        let (round, period) = session.position().unzip();
        rows.push(json!({
            "session_id": session.id(),
            "participant_id": participant_id,
            "phase": session.phase().label(),
            "round": round,
            "period": period,
            "rounds_completed": session.record().rounds.len(),
            "payment_total": session.record().payment_total,
        }));
    }
    Json(json!({ "study_id": state.config.study_id, "sessions": rows }))
}

async fn ws_upgrade(State(state): State<Arc<AppState>>, ws: WebSocketUpgrade) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(state, socket))
}

/// Finds or opens the session for the participant named in a HELLO.
fn channel_for(state: &AppState, participant_id: &str, now_ms: u64) -> Result<Channel, StorageError> {
    let mut map = state.sessions.lock().expect("session map lock");
    if let Some(c) = map.get(participant_id) {
        return Ok(Arc::clone(c));
    }
    let mut study = state.study.lock().expect("study lock");
    let channel = SessionChannel::open(&mut study, participant_id, Some(&state.dir), now_ms)?;
    let channel = Arc::new(tokio::sync::Mutex::new(channel));
    map.insert(participant_id.to_string(), Arc::clone(&channel));
    Ok(channel)
}

async fn send(socket: &mut WebSocket, envelope: &Envelope) -> bool {
    socket.send(WsMessage::Text(envelope.to_json().into())).await.is_ok()
}

async fn connection(state: Arc<AppState>, mut socket: WebSocket) {
    let mut bound: Option<Channel> = None;
    while let Some(Ok(frame)) = socket.recv().await {
        let text = match frame {
            WsMessage::Text(t) => t.to_string(),
            WsMessage::Binary(b) => match String::from_utf8(b.to_vec()) {
                Ok(t) => t,
                Err(_) => {
                    if !send(&mut socket, &Envelope::error(None, 0, ErrorCode::BadRequest, "frames must be UTF-8 text")).await {
                        break;
                    }
                    continue;
                }
            },
            WsMessage::Close(_) => break,
            _ => continue,
        };
        let now = state.clock.now_ms();
        let channel = match &bound {
            Some(c) => Arc::clone(c),
            None => {
                let participant = match Envelope::parse(&text) {
                    Ok(Envelope {
                        message: Message::Hello { participant_id },
                        ..
                    }) => participant_id,
                    _ => {
                        if !send(&mut socket, &Envelope::error(None, 0, ErrorCode::BadRequest, "first message must be HELLO")).await {
                            break;
                        }
                        continue;
                    }
                };
                match channel_for(&state, &participant, now) {
                    Ok(c) => {
                        bound = Some(Arc::clone(&c));
                        c
                    }
                    Err(e) => {
                        tracing::warn!(%participant, error = %e, "cannot open session");
                        let code = match e {
                            StorageError::Session(_) => ErrorCode::Conflict,
                            _ => ErrorCode::Internal,
                        };
                        let _ = send(&mut socket, &Envelope::error(None, 0, code, e.to_string())).await;
                        continue;
                    }
                }
            }
        };
        let replies = {
            let mut guard = channel.lock().await;
            match guard.handle_text(&text, now) {
                Ok(r) => r,
                Err(e) => {
                    tracing::error!(session = guard.id(), error = %e, "log write failed");
                    vec![Envelope::error(Some(guard.id().to_string()), 0, ErrorCode::Internal, "could not record the message")]
                }
            }
        };
        for r in &replies {
            if !send(&mut socket, r).await {
                return;
            }
        }
    }
}
