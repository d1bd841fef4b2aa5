//! WebSocket server that drives a debug session and pushes object diagrams.
//!
//! Clients connect to `/debug`. Every stop of the debugged program (or entry
//! of a replayed trace) is extracted, laid out, and broadcast to all clients
//! as an XML diagram frame carrying a version number.

pub mod config;
pub mod protocol;
mod session;

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use odbg_core::dap::{DapError, DapSession, Transport, DEFAULT_TIMEOUT};
use odbg_core::snapshot::{load_snapshot, load_trace, play_trace, SnapshotError, SnapshotHeap};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

pub use config::{ServerConfig, SourceSpec, SourceSpecError, DEFAULT_PORT};
pub use protocol::{ClientCommand, Status, StatusFrame, StepKind};

use session::{Backend, ClientId, LoopInput, Session};

const PLACEHOLDER_PAGE: &str = "<!DOCTYPE html>\n<html><head><title>odbg</title></head><body>\n\
<p>odbg debug server. Connect a diagram client to <code>/debug</code>.</p>\n</body></html>\n";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("reading {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("loading {path}: {source}")]
    Load {
        path: String,
        #[source]
        source: SnapshotError,
    },
    #[error("connecting to the debug adapter: {0}")]
    Connect(#[source] std::io::Error),
    #[error("starting the debug session: {0}")]
    Adapter(#[source] DapError),
    #[error("binding {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone)]
struct AppState {
    inputs: mpsc::UnboundedSender<LoopInput>,
    next_client: Arc<AtomicU64>,
}

/// A running server. Dropping the handle leaves the server running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    /// Address actually bound (useful with port 0).
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.shutdown.send(());
        join(self.task).await
    }

    /// Waits until the server stops on its own (it normally does not).
    pub async fn wait(self) -> std::io::Result<()> {
        join(self.task).await
    }
}

async fn join(task: JoinHandle<std::io::Result<()>>) -> std::io::Result<()> {
    match task.await {
        Ok(result) => result,
        Err(e) => Err(std::io::Error::other(e)),
    }
}

fn read(path: &std::path::Path) -> Result<String, ServeError> {
    std::fs::read_to_string(path).map_err(|source| ServeError::Read {
        path: path.display().to_string(),
        source,
    })
}

async fn open_backend(config: &ServerConfig) -> Result<Backend, ServeError> {
    let loaded = |path: &std::path::Path, source| ServeError::Load {
        path: path.display().to_string(),
        source,
    };
    match &config.source {
        SourceSpec::Snapshot(path) => {
            let snapshot = load_snapshot(&read(path)?).map_err(|e| loaded(path, e))?;
            Ok(Backend::Snapshot(SnapshotHeap::new(snapshot)))
        }
        SourceSpec::Trace(path) => {
            let trace = load_trace(&read(path)?).map_err(|e| loaded(path, e))?;
            Ok(Backend::Trace(play_trace(trace)))
        }
        SourceSpec::DapTcp(addr) => {
            let transport = Transport::tcp(addr.as_str()).await.map_err(ServeError::Connect)?;
            start_adapter(transport, config).await
        }
        SourceSpec::DapExec(command) => {
            let transport = Transport::spawn(command).map_err(ServeError::Connect)?;
            start_adapter(transport, config).await
        }
    }
}

async fn start_adapter(transport: Transport, config: &ServerConfig) -> Result<Backend, ServeError> {
    let session = DapSession::connect_and_initialize(transport, &config.launch, DEFAULT_TIMEOUT)
        .await
        .map_err(ServeError::Adapter)?;
    Ok(Backend::Dap(Box::new(session)))
}

/// Opens the source, binds the listener and starts serving.
pub async fn serve(config: ServerConfig) -> Result<ServerHandle, ServeError> {
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.addr,
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: config.addr,
        source,
    })?;
    let backend = open_backend(&config).await?;

    let (inputs, receiver) = mpsc::unbounded_channel();
    tokio::spawn(Session::new(backend, config.depth).run(receiver));

    let state = AppState {
        inputs,
        next_client: Arc::new(AtomicU64::new(1)),
    };
    let mut app = Router::new().route("/debug", get(upgrade));
    app = match &config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER_PAGE) })),
    };
    let app = app.with_state(state);

    let (shutdown, stop) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                // a dropped handle means "run until the process exits"
                if stop.await.is_err() {
                    std::future::pending::<()>().await;
                }
            })
            .await
    });
    tracing::info!(%addr, source = %config.source, "serving");
    Ok(ServerHandle {
        addr,
        shutdown,
        task,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(mut socket: WebSocket, state: AppState) {
    let id: ClientId = state.next_client.fetch_add(1, Ordering::Relaxed);
    let (outbox, mut frames) = mpsc::unbounded_channel();
    if state.inputs.send(LoopInput::Join { id, outbox }).is_err() {
        return;
    }
    tracing::debug!(id, "client joined");
    loop {
        tokio::select! {
            frame = frames.recv() => {
                let Some(frame) = frame else { break };
                if socket.send(Message::Text(frame.into())).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv() => {
                let input = match incoming {
                    Some(Ok(Message::Text(text))) => LoopInput::Command { id, text: text.to_string() },
                    Some(Ok(Message::Binary(_))) => LoopInput::NotText { id },
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                };
                if state.inputs.send(input).is_err() {
                    break;
                }
            }
        }
    }
    let _ = state.inputs.send(LoopInput::Leave { id });
    tracing::debug!(id, "client left");
}
