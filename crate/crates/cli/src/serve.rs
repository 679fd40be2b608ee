//! WebSocket bridge to a [`SessionHost`].
//!
//! Each connection gets its own event subscription. Requests from one
//! connection are answered in order; requests across connections are
//! ordered by the host's single queue.

use std::path::PathBuf;

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use icon_core::kernel::wire::{FallbackKernel, WireKernel};
use icon_core::kernel::{KernelBackend, MockKernel};
use icon_core::metrics::write_log;
use icon_core::notebook::Notebook;
use icon_core::session::host::{HostHandle, SessionHost};
use icon_core::session::protocol::{parse_client_frame, ServerFrame};
use icon_core::session::Session;
use icon_core::workspace::{EngineConfig, Mode};
use serde_json::json;
use tokio::sync::mpsc;

pub struct Options {
    pub addr: String,
    pub notebook: Notebook,
    pub mode: Mode,
    pub config: EngineConfig,
    pub kernel_adapter: Option<String>,
    pub log: Option<PathBuf>,
}

#[derive(Clone)]
struct App {
    host: HostHandle,
    notebook_id: String,
    mode: Mode,
}

fn kernel(adapter: Option<&str>) -> Result<Box<dyn KernelBackend>> {
    let Some(command) = adapter else {
        return Ok(Box::new(MockKernel::new()));
    };
    let mut parts = command.split_whitespace();
    let program = parts.next().context("empty --kernel-adapter command")?;
    let args: Vec<String> = parts.map(str::to_string).collect();
    let remote = WireKernel::spawn(program, &args).with_context(|| format!("starting kernel adapter `{command}`"))?;
    tracing::info!("using kernel adapter `{command}`");
    Ok(Box::new(FallbackKernel::new(remote).with_warning_hook(|w| tracing::warn!("{w}"))))
}

pub fn run(opts: Options) -> Result<()> {
    let notebook_id = opts.notebook.id.clone();
    let session = Session::with_kernel(opts.notebook, opts.mode, opts.config, kernel(opts.kernel_adapter.as_deref())?);
    let host = SessionHost::spawn(session);
    let app = App {
        host: host.handle(),
        notebook_id,
        mode: opts.mode,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&opts.addr)
            .await
            .with_context(|| format!("binding {}", opts.addr))?;
        let local = listener.local_addr()?;
        // Printed on stdout so scripts can pick up an ephemeral port.
        println!("listening on {local}");
        tracing::info!("serving {} in {:?} mode", app.notebook_id, app.mode);
        let router = Router::new()
            .route("/ws", get(upgrade))
            .route("/health", get(health))
            .with_state(app);
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .context("server failed")
    })?;
    let session = host.shutdown();
    if let Some(path) = opts.log {
        std::fs::write(&path, write_log(session.log())).with_context(|| format!("writing {}", path.display()))?;
        tracing::info!("wrote {} events to {}", session.log().len(), path.display());
    }
    Ok(())
}

async fn health(State(app): State<App>) -> Json<serde_json::Value> {
    Json(json!({"status": "ok", "notebook": app.notebook_id, "mode": app.mode}))
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<App>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app.host))
}

fn frame(f: &ServerFrame) -> String {
    serde_json::to_string(f).expect("frames serialize")
}

async fn client(mut socket: WebSocket, host: HostHandle) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let events = host.subscribe();
    let forward = out_tx.clone();
    std::thread::spawn(move || {
        for event in events {
            if forward.send(frame(&ServerFrame::Event { event })).is_err() {
                break;
            }
        }
    });
    loop {
        tokio::select! {
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let reply = match parse_client_frame(text.as_str()) {
                        Ok(request) => {
                            let host = host.clone();
                            match tokio::task::spawn_blocking(move || host.request(request)).await {
                                Ok(reply) => reply,
                                Err(_) => break,
                            }
                        }
                        Err(reply) => reply,
                    };
                    let _ = out_tx.send(frame(&ServerFrame::Reply(reply)));
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            Some(text) = out_rx.recv() => {
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
        }
    }
}
