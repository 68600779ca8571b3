//! Live telemetry and teleoperation over a websocket.
//!
//! One simulation task owns the [`TeleopSession`] and steps it at the control
//! rate. Connections talk to it through queues only: client messages go in
//! through an mpsc channel, frames come out through a broadcast channel.
//!
//! Clients connect to `/ws?role=driver` or `/ws?role=observer` (the default).
//! The last driver to connect controls the robot; a previous driver is told
//! it was demoted and keeps receiving frames.

pub mod protocol;
mod sim;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use furrow_core::env::EnvConfig;
use furrow_core::teleop::{TeleopError, TeleopSession};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{broadcast, mpsc, watch};

pub use protocol::{Envelope, ErrorCode, ErrorPayload, Message, Role};
pub use sim::Inbound;

#[derive(Debug, thiserror::Error)]
pub enum TelemetryError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Session(#[from] TeleopError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("server task failed: {0}")]
    Join(String),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub env: EnvConfig,
    pub seed: u64,
    /// Wall-clock time per control step; defaults to the simulation `dt`.
    pub tick: Duration,
    /// Each episode's trace is written here as `session_NNNN.jsonl` on reset
    /// and shutdown.
    pub record_dir: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(env: EnvConfig, seed: u64) -> Self {
        let tick = Duration::from_secs_f64(env.dt);
        Self {
            env,
            seed,
            tick,
            record_dir: None,
        }
    }
}

/// A running server. Dropping the handle leaves the server running; call
/// [`ServerHandle::shutdown`] to stop it and flush the recorded trace.
pub struct ServerHandle {
    pub local_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    sim: tokio::task::JoinHandle<Result<(), TelemetryError>>,
    http: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("ws://{}/ws", self.local_addr)
    }

    pub async fn shutdown(self) -> Result<(), TelemetryError> {
        let _ = self.shutdown.send(true);
        let res = self.sim.await.map_err(|e| TelemetryError::Join(e.to_string()))?;
        self.http.abort();
        res
    }

    /// Resolves when the simulation loop ends on its own (it only does on error).
    pub async fn wait(self) -> Result<(), TelemetryError> {
        let res = self.sim.await.map_err(|e| TelemetryError::Join(e.to_string()));
        self.http.abort();
        res?
    }
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::UnboundedSender<Inbound>,
    frames: broadcast::Sender<Arc<str>>,
    next_id: Arc<AtomicU64>,
}

#[derive(Deserialize)]
struct WsParams {
    #[serde(default)]
    role: Role,
}

/// Binds `addr` and starts the simulation and websocket tasks.
pub async fn serve(config: ServerConfig, addr: SocketAddr) -> Result<ServerHandle, TelemetryError> {
    let session = TeleopSession::new(config.env.clone(), config.seed)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| TelemetryError::Bind { addr, source })?;
    let local_addr = listener.local_addr()?;

    let (inbound_tx, inbound_rx) = mpsc::unbounded_channel();
    let (frames_tx, _) = broadcast::channel(256);
    let (shutdown_tx, shutdown_rx) = watch::channel(false);

    let sim = tokio::spawn(sim::run(
        session,
        config.tick,
        config.record_dir.clone(),
        inbound_rx,
        frames_tx.clone(),
        shutdown_rx,
    ));

    let state = AppState {
        inbound: inbound_tx,
        frames: frames_tx,
        next_id: Arc::new(AtomicU64::new(1)),
    };
    let app = Router::new().route("/ws", get(upgrade)).with_state(state);
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("http server stopped: {e}");
        }
    });
    log::info!("telemetry listening on ws://{local_addr}/ws");
    Ok(ServerHandle {
        local_addr,
        shutdown: shutdown_tx,
        sim,
        http,
    })
}

async fn upgrade(ws: WebSocketUpgrade, Query(params): Query<WsParams>, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, params.role, state))
}

async fn client(socket: WebSocket, role: Role, state: AppState) {
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let (mut sink, mut stream) = socket.split();
    let (direct_tx, mut direct_rx) = mpsc::unbounded_channel::<Arc<str>>();
    // subscribe before announcing so no frame after the greeting is missed
    let mut frames = state.frames.subscribe();
    if state.inbound.send(Inbound::Connect { id, role, direct: direct_tx }).is_err() {
        return;
    }
    loop {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if sink.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => log::warn!("client {id} skipped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
            direct = direct_rx.recv() => match direct {
                Some(text) => {
                    if sink.send(WsMessage::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = stream.next() => match incoming {
                Some(Ok(WsMessage::Text(text))) => {
                    if state.inbound.send(Inbound::Text { id, text: text.to_string() }).is_err() {
                        break;
                    }
                }
                Some(Ok(WsMessage::Binary(_))) => {
                    let _ = state.inbound.send(Inbound::Text { id, text: String::new() });
                }
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    let _ = state.inbound.send(Inbound::Disconnect { id });
}
