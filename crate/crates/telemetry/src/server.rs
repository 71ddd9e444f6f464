use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, SyncSender, TrySendError};
use std::sync::Arc;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use tokio::sync::{broadcast, mpsc, watch};
use tower_http::services::ServeDir;

use hybridnav_core::sim::{Scenario, Simulation};

use crate::protocol::{
    parse_client_message, ClientCommand, Frame, GridInfo, GridUpdate, Hello, ServerMessage, SCHEMA_VERSION,
};
use crate::session::{run_loop, Channels, Inbound, LoopConfig, SessionLog, Snapshot};

const COMMAND_QUEUE: usize = 256;
const FRAME_BUFFER: usize = 64;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub scenario: Scenario<f64>,
    /// Port 0 picks a free one; see [`ServerHandle::addr`].
    pub addr: SocketAddr,
    /// Wall-clock multiplier: 2.0 runs ticks twice as fast as real time.
    pub speed: f64,
    /// Built console assets. Without it `/` serves a placeholder page.
    pub static_dir: Option<PathBuf>,
    /// Session logs go to `out_dir/session-N/`.
    pub out_dir: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(scenario: Scenario<f64>, port: u16) -> Self {
        Self {
            scenario,
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            speed: 1.0,
            static_dir: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] hybridnav_core::sim::ScenarioError),
    #[error("speed must be positive and finite, got {0}")]
    Speed(f64),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("runtime: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation thread panicked")]
    LoopPanicked,
}

#[derive(Clone)]
struct AppState {
    inbound: SyncSender<Inbound>,
    frames: broadcast::Sender<Arc<Snapshot>>,
    latest: watch::Receiver<Option<Arc<Snapshot>>>,
    paused: Arc<AtomicBool>,
    hello: Hello,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    sim: std::thread::JoinHandle<SessionLog>,
    http: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the loop and the listener and returns the current session.
    pub async fn shutdown(self) -> Result<SessionLog, ServeError> {
        self.stop.store(true, Ordering::SeqCst);
        self.http.abort();
        let sim = self.sim;
        tokio::task::spawn_blocking(move || sim.join())
            .await
            .map_err(|_| ServeError::LoopPanicked)?
            .map_err(|_| ServeError::LoopPanicked)
    }
}

/// Binds, starts the simulation thread and returns immediately.
pub async fn start(config: ServeConfig) -> Result<ServerHandle, ServeError> {
    if !(config.speed.is_finite() && config.speed > 0.0) {
        return Err(ServeError::Speed(config.speed));
    }
    // surface scenario errors here rather than on the loop thread
    let grid = Simulation::new(config.scenario.clone())?.world().geometry().clone();
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.addr,
            source,
        })?;
    let addr = listener.local_addr()?;

    let (inbound_tx, inbound_rx) = sync_channel(COMMAND_QUEUE);
    let (frames, _) = broadcast::channel(FRAME_BUFFER);
    let (latest_tx, latest_rx) = watch::channel(None);
    let paused = Arc::new(AtomicBool::new(false));
    let stop = Arc::new(AtomicBool::new(false));

    let s = &config.scenario;
    let hello = Hello {
        schema_version: SCHEMA_VERSION,
        scenario: s.name.clone(),
        tick_dt: s.sim.tick_dt,
        speed: config.speed,
        paused: false,
        grid: GridInfo {
            width: grid.width,
            height: grid.height,
            resolution: grid.resolution,
            origin_x: grid.origin.x,
            origin_y: grid.origin.y,
        },
        robot_radius: s.nav.robot_radius,
    };
    let state = AppState {
        inbound: inbound_tx,
        frames: frames.clone(),
        latest: latest_rx,
        paused: paused.clone(),
        hello,
    };

    let loop_cfg = LoopConfig {
        scenario: config.scenario.clone(),
        speed: config.speed,
        out_dir: config.out_dir.clone(),
    };
    let channels = Channels {
        inbound: inbound_rx,
        frames,
        latest: latest_tx,
        paused,
        stop: stop.clone(),
    };
    let sim = std::thread::Builder::new()
        .name("hybridnav-sim".into())
        .spawn(move || run_loop(loop_cfg, channels))?;

    let mut app = Router::new().route("/ws", get(ws_upgrade));
    app = match &config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(placeholder)),
    };
    let app = app.with_state(state);
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            eprintln!("http server stopped: {e}");
        }
    });

    Ok(ServerHandle { addr, stop, sim, http })
}

/// Runs until Ctrl-C on a private runtime, then returns the last session.
pub fn serve_blocking(config: ServeConfig) -> Result<SessionLog, ServeError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let handle = start(config).await?;
        eprintln!("serving on http://{} (WebSocket at /ws)", handle.addr());
        let _ = tokio::signal::ctrl_c().await;
        handle.shutdown().await
    })
}

async fn placeholder() -> Html<&'static str> {
    Html(concat!(
        "<!doctype html><title>hybridnav</title>",
        "<p>Telemetry is live at <code>/ws</code>. ",
        "Start the server with a static directory to serve the console here.</p>"
    ))
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

struct ClientState {
    last_seq: Option<u64>,
    last_epoch: Option<u32>,
    last_tick: Option<u64>,
    last_plan: Option<u32>,
}

impl ClientState {
    /// Turns a snapshot into this client's next frame, or None if it is
    /// not newer than what was already sent.
    fn frame(&mut self, snap: &Snapshot, keyframe: bool) -> Option<Frame> {
        let new_epoch = self.last_epoch != Some(snap.frame.epoch);
        if !new_epoch && self.last_tick.is_some_and(|t| snap.frame.tick <= t) {
            return None;
        }
        let keyframe = keyframe || new_epoch;
        let mut frame = snap.frame.clone();
        frame.grid = if keyframe {
            GridUpdate::Keyframe {
                cells: snap.cells.as_ref().clone(),
            }
        } else {
            GridUpdate::Delta {
                runs: snap.delta.clone(),
            }
        };
        if keyframe || self.last_plan != Some(frame.plan_id) {
            frame.plan = Some(snap.plan.as_ref().clone());
        }
        self.last_epoch = Some(frame.epoch);
        self.last_tick = Some(frame.tick);
        self.last_plan = Some(frame.plan_id);
        Some(frame)
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await.is_ok()
}

async fn client(mut socket: WebSocket, state: AppState) {
    let mut hello = state.hello.clone();
    hello.paused = state.paused.load(Ordering::SeqCst);
    if !send(&mut socket, &ServerMessage::Hello(hello)).await {
        return;
    }
    let mut frames = state.frames.subscribe();
    let (reply_tx, mut replies) = mpsc::unbounded_channel();
    let mut cs = ClientState {
        last_seq: None,
        last_epoch: None,
        last_tick: None,
        last_plan: None,
    };
    // join mid-run with the full grid; a fresh server has no snapshot yet
    // and the first broadcast frame becomes the keyframe
    let mut need_keyframe = true;
    let current = state.latest.borrow().clone();
    if let Some(snap) = current {
        if let Some(f) = cs.frame(&snap, true) {
            if !send(&mut socket, &ServerMessage::Frame(Box::new(f))).await {
                return;
            }
        }
        need_keyframe = false;
    }

    loop {
        tokio::select! {
            got = frames.recv() => match got {
                Ok(snap) => {
                    if let Some(f) = cs.frame(&snap, need_keyframe) {
                        need_keyframe = false;
                        if !send(&mut socket, &ServerMessage::Frame(Box::new(f))).await {
                            return;
                        }
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    // deltas were lost; resync from the newest snapshot
                    let current = state.latest.borrow().clone();
                    match current.and_then(|snap| cs.frame(&snap, true)) {
                        Some(f) => {
                            if !send(&mut socket, &ServerMessage::Frame(Box::new(f))).await {
                                return;
                            }
                        }
                        None => need_keyframe = true,
                    }
                }
                Err(broadcast::error::RecvError::Closed) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
            },
            Some(reply) = replies.recv() => {
                if !send(&mut socket, &reply).await {
                    return;
                }
            }
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        let err = ServerMessage::Error { seq: None, message: "binary messages are not supported".into() };
                        if !send(&mut socket, &err).await {
                            return;
                        }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                match on_text(&text, &mut cs, &state, &reply_tx) {
                    Ok(()) => {}
                    Err(Reject { seq, message, close }) => {
                        if !send(&mut socket, &ServerMessage::Error { seq, message }).await {
                            return;
                        }
                        if close {
                            let _ = socket
                                .send(Message::Close(Some(CloseFrame { code: 1002, reason: "schema version mismatch".into() })))
                                .await;
                            return;
                        }
                    }
                }
            }
        }
    }
}

struct Reject {
    seq: Option<u64>,
    message: String,
    close: bool,
}

fn reject(seq: Option<u64>, message: impl Into<String>) -> Reject {
    Reject {
        seq,
        message: message.into(),
        close: false,
    }
}

fn on_text(
    text: &str,
    cs: &mut ClientState,
    state: &AppState,
    reply: &mpsc::UnboundedSender<ServerMessage>,
) -> Result<(), Reject> {
    let msg = parse_client_message(text).map_err(|e| reject(None, e))?;
    if let ClientCommand::Hello { schema_version } = msg.command {
        if schema_version != SCHEMA_VERSION {
            return Err(Reject {
                seq: msg.seq,
                message: format!("schema version {schema_version} not supported, server speaks {SCHEMA_VERSION}"),
                close: true,
            });
        }
        return Ok(());
    }
    let seq = msg.seq.ok_or_else(|| reject(None, "command needs a seq"))?;
    if cs.last_seq.is_some_and(|last| seq <= last) {
        return Err(reject(
            Some(seq),
            format!("seq {seq} not greater than previous {}", cs.last_seq.unwrap()),
        ));
    }
    cs.last_seq = Some(seq);
    let reply = reply.clone();
    let inbound = match msg.command {
        ClientCommand::Pause => Inbound::Pause { seq, reply },
        ClientCommand::Resume => Inbound::Resume { seq, reply },
        ClientCommand::Reset => Inbound::Reset { seq, reply },
        ClientCommand::Sim(command) => Inbound::Sim { seq, command, reply },
        ClientCommand::Hello { .. } => unreachable!(),
    };
    state.inbound.try_send(inbound).map_err(|e| match e {
        TrySendError::Full(_) => reject(Some(seq), "command queue full"),
        TrySendError::Disconnected(_) => reject(Some(seq), "simulation stopped"),
    })
}
