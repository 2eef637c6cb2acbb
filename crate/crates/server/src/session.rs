use crate::protocol::{encode_frame, ControlMessage, ServerMessage};
use crate::scene::Scene;
use crate::state::SessionState;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use sixway_core::image::encode_png;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::{mpsc, watch};
use tower_http::services::ServeDir;

const FALLBACK_PAGE: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>sixway live</title></head>
<body style="background:#111;color:#ddd;font-family:sans-serif">
<p id="status">connecting</p><img id="view" alt="">
<script>
const ws = new WebSocket(`ws://${location.host}/ws`);
ws.binaryType = "arraybuffer";
let url = null;
ws.onopen = () => { document.getElementById("status").textContent = "connected"; };
ws.onclose = () => { document.getElementById("status").textContent = "disconnected"; };
ws.onmessage = (ev) => {
  if (typeof ev.data === "string") {
    const m = JSON.parse(ev.data);
    if (m.type === "stats") document.getElementById("status").textContent =
      `frame ${m.frame_id}: ${m.render_ms.toFixed(1)} ms`;
    return;
  }
  const png = new Blob([new Uint8Array(ev.data, 24)], { type: "image/png" });
  if (url) URL.revokeObjectURL(url);
  url = URL.createObjectURL(png);
  document.getElementById("view").src = url;
};
</script></body></html>
"#;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr} (port in use?): {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Directory of the built viewer; a minimal page is served when absent.
    pub static_dir: Option<PathBuf>,
    /// Frame advance rate while playing.
    pub play_fps: f64,
    pub initial: SessionState,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { static_dir: None, play_fps: 12.0, initial: SessionState::default() }
    }
}

#[derive(Clone)]
struct App {
    scene: Arc<Scene>,
    config: Arc<ServerConfig>,
}

pub fn router(scene: Arc<Scene>, config: ServerConfig) -> Router {
    let static_dir = config.static_dir.clone();
    let app = App { scene, config: Arc::new(config) };
    let r = Router::new().route("/ws", get(upgrade)).with_state(app);
    match static_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r.fallback(get(|| async { Html(FALLBACK_PAGE) })),
    }
}

pub async fn serve(addr: SocketAddr, scene: Arc<Scene>, config: ServerConfig) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    serve_on(listener, scene, config).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, scene: Arc<Scene>, config: ServerConfig) -> Result<(), ServeError> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(scene, config)).await?;
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<App>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, app))
}

async fn run_session(socket: WebSocket, app: App) {
    let (mut sink, mut incoming) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Message>();
    let writer = tokio::spawn(async move {
        while let Some(m) = out_rx.recv().await {
            if sink.send(m).await.is_err() {
                break;
            }
        }
    });

    let frame_count = app.scene.frame_count();
    let mut state = app.config.initial.clone();
    let (state_tx, state_rx) = watch::channel(state.clone());
    let last_frame = Arc::new(AtomicU64::new(0));
    let worker = tokio::spawn(render_worker(app.scene.clone(), state_rx, out_tx.clone(), last_frame.clone()));

    let period = Duration::from_secs_f64(1.0 / app.config.play_fps.max(0.1));
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
    let reject = |message: String| {
        let msg = ServerMessage::Error { message, frame_id: last_frame.load(Ordering::SeqCst) };
        let _ = out_tx.send(Message::Text(msg.to_json().into()));
    };

    loop {
        tokio::select! {
            msg = incoming.next() => match msg {
                Some(Ok(Message::Text(text))) => match ControlMessage::parse(&text) {
                    Ok(control) => match state.apply(&control, frame_count) {
                        Ok(()) => {
                            state_tx.send_replace(state.clone());
                        }
                        Err(e) => reject(e.to_string()),
                    },
                    Err(e) => reject(format!("malformed control message: {e}")),
                },
                Some(Ok(Message::Binary(_))) => reject("binary control messages are not supported".into()),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            _ = ticker.tick(), if state.playing => {
                state.advance(frame_count);
                state_tx.send_replace(state.clone());
            }
        }
    }
    drop(state_tx);
    let _ = worker.await;
    drop(out_tx);
    let _ = writer.await;
}

/// Renders the newest state whenever it changes; intermediate states that
/// arrive during a render are skipped.
async fn render_worker(
    scene: Arc<Scene>,
    mut states: watch::Receiver<SessionState>,
    out: mpsc::UnboundedSender<Message>,
    last_frame: Arc<AtomicU64>,
) {
    let mut next_id = 1u64;
    states.mark_changed();
    while states.changed().await.is_ok() {
        let state = states.borrow_and_update().clone();
        let scene = scene.clone();
        let job = tokio::task::spawn_blocking(move || {
            let out = scene.render_once(&state).map_err(|e| e.to_string())?;
            let png = encode_png(&out.image).map_err(|e| format!("encode: {e}"))?;
            Ok::<_, String>((out, png, state))
        });
        match job.await {
            Ok(Ok((render, png, state))) => {
                let id = next_id;
                next_id += 1;
                let bytes = encode_frame(render.image.width as u32, render.image.height as u32, id, render.render_ms as f32, &png);
                let stats = ServerMessage::Stats {
                    frame_id: id,
                    state_seq: state.seq,
                    frame: state.frame,
                    render_ms: render.render_ms,
                    stages: render.stages,
                };
                last_frame.store(id, Ordering::SeqCst);
                if out.send(Message::Binary(bytes.into())).is_err() || out.send(Message::Text(stats.to_json().into())).is_err() {
                    break;
                }
            }
            Ok(Err(message)) => {
                let msg = ServerMessage::Error { message, frame_id: last_frame.load(Ordering::SeqCst) };
                if out.send(Message::Text(msg.to_json().into())).is_err() {
                    break;
                }
            }
            Err(e) => {
                log::error!("render task failed: {e}");
                break;
            }
        }
    }
}
