//! The authoritative simulation loop, run on its own thread.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use tokio::sync::{broadcast, mpsc, watch};

use hybridnav_core::sim::{Metrics, Motion, Scenario, SimTrace, Simulation};
use hybridnav_core::world::CellState;

use crate::protocol::{diff_runs, grid_checksum_hex, keyframe_cells, Frame, GridUpdate, HistogramView, ObstacleView, PlanView, ServerMessage};

/// Work queued for the loop by connection handlers.
#[derive(Debug)]
pub(crate) enum Inbound {
    Sim {
        seq: u64,
        command: hybridnav_core::sim::OperatorCommand<f64>,
        reply: mpsc::UnboundedSender<ServerMessage>,
    },
    Pause { seq: u64, reply: mpsc::UnboundedSender<ServerMessage> },
    Resume { seq: u64, reply: mpsc::UnboundedSender<ServerMessage> },
    Reset { seq: u64, reply: mpsc::UnboundedSender<ServerMessage> },
}

/// One tick as published to every client. Per-client writers choose
/// between the delta and the full raster.
#[derive(Debug)]
pub(crate) struct Snapshot {
    pub frame: Frame,
    pub plan: Arc<PlanView>,
    pub delta: Vec<(usize, usize, i8)>,
    pub cells: Arc<String>,
}

/// What a finished session leaves behind.
#[derive(Debug, Clone)]
pub struct SessionLog {
    pub trace: SimTrace<f64>,
    /// The scenario plus the command log, replayable as-is.
    pub replay: Scenario<f64>,
    /// Largest delay of a tick past its wall-clock deadline.
    pub max_lateness: Duration,
}

impl SessionLog {
    /// Writes `trace.csv`, `metrics.json`, `commands.json` and `replay.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trace.csv"), self.trace.to_csv())?;
        let metrics = serde_json::json!({
            "outcome": self.trace.outcome,
            "fail_reason": self.trace.fail_reason,
            "metrics": self.trace.metrics,
        });
        std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
        std::fs::write(dir.join("commands.json"), serde_json::to_string_pretty(&self.trace.commands)?)?;
        std::fs::write(dir.join("replay.json"), serde_json::to_string_pretty(&self.replay)?)?;
        Ok(())
    }
}

pub(crate) struct LoopConfig {
    pub scenario: Scenario<f64>,
    pub speed: f64,
    pub out_dir: Option<PathBuf>,
}

pub(crate) struct Channels {
    pub inbound: Receiver<Inbound>,
    pub frames: broadcast::Sender<Arc<Snapshot>>,
    pub latest: watch::Sender<Option<Arc<Snapshot>>>,
    pub paused: Arc<AtomicBool>,
    pub stop: Arc<AtomicBool>,
}

struct Session {
    sim: Simulation<f64>,
    epoch: u32,
    prev_states: Vec<CellState>,
    cells: Arc<String>,
    plan: Arc<PlanView>,
    plan_id: u32,
}

impl Session {
    fn new(scenario: &Scenario<f64>, epoch: u32) -> Self {
        let sim = Simulation::new(scenario.clone()).expect("scenario validated before serving");
        let prev_states = sim.belief().states().to_vec();
        let mut s = Self {
            cells: Arc::new(keyframe_cells(&prev_states)),
            prev_states,
            epoch,
            plan: Arc::new(PlanView {
                xs: Vec::new(),
                ys: Vec::new(),
                escape_len: 0,
            }),
            plan_id: u32::MAX,
            sim,
        };
        s.refresh_plan();
        s
    }

    fn refresh_plan(&mut self) {
        let state = &self.sim.navigator().state;
        if state.plan_id == self.plan_id {
            return;
        }
        self.plan_id = state.plan_id;
        self.plan = Arc::new(match &state.plan {
            Some(p) => PlanView {
                xs: p.xs.clone(),
                ys: p.ys.clone(),
                escape_len: state.escape_len,
            },
            None => PlanView {
                xs: Vec::new(),
                ys: Vec::new(),
                escape_len: 0,
            },
        });
    }

    /// Steps once and packages the tick.
    fn tick(&mut self) -> Snapshot {
        let record = self.sim.step().clone();
        let states = self.sim.belief().states();
        let delta = diff_runs(&self.prev_states, states);
        if !delta.is_empty() {
            self.prev_states.copy_from_slice(states);
            self.cells = Arc::new(keyframe_cells(states));
        }
        self.refresh_plan();

        let diag = self.sim.last_diagnostics();
        let vfh = self.sim.scenario().nav.vfh;
        let histogram = diag.and_then(|d| {
            d.histogram
                .as_ref()
                .map(|h| HistogramView::new(h, vfh.threshold, d.target_bearing, d.steering.map(|s| s.angle)))
        });
        let now = record.time;
        let obstacles = self
            .sim
            .active_obstacles()
            .map(|(o, p)| ObstacleView {
                id: o.id.clone(),
                x: p.x,
                y: p.y,
                radius: o.radius,
                external: matches!(o.motion, Motion::External { .. }),
            })
            .collect();
        let frame = Frame {
            tick: record.tick,
            time: now,
            epoch: self.epoch,
            pose: record.pose,
            goal: self.sim.navigator().state.goal,
            mode: record.mode,
            command: record.command,
            error: record.error,
            min_range: record.min_range,
            clearance: record.clearance,
            events: record.events,
            plan_id: self.plan_id,
            plan: None,
            reference: diag.and_then(|d| d.reference.map(|r| r.reference)),
            histogram,
            grid: GridUpdate::Delta { runs: Vec::new() },
            checksum: grid_checksum_hex(self.sim.belief()),
            obstacles,
            metrics: finite_metrics(&self.sim.trace().metrics),
        };
        Snapshot {
            frame,
            plan: self.plan.clone(),
            delta,
            cells: self.cells.clone(),
        }
    }

    fn log(&self, max_lateness: Duration) -> SessionLog {
        let trace = self.sim.trace().clone();
        let mut replay = self.sim.scenario().clone();
        replay.sim.commands = trace.commands.clone();
        replay.sim.max_ticks = trace.records.len() as u64;
        replay.sim.hold = true;
        SessionLog {
            trace,
            replay,
            max_lateness,
        }
    }
}

/// JSON has no infinity; before the first tick min_clearance is unset.
fn finite_metrics(m: &Metrics<f64>) -> Metrics<f64> {
    let mut m = m.clone();
    if !m.min_clearance.is_finite() {
        m.min_clearance = 0.0;
    }
    m
}

/// Runs until `stop` is raised or every command sender is gone, then
/// returns the log of the current session. Earlier sessions (ended by
/// RESET) are written to `out_dir` as they end.
pub(crate) fn run_loop(cfg: LoopConfig, ch: Channels) -> SessionLog {
    let period = Duration::from_secs_f64(cfg.scenario.sim.tick_dt / cfg.speed);
    let mut epoch = 0;
    let mut session = Session::new(&cfg.scenario, epoch);
    let mut deadline = Instant::now();
    let mut max_lateness = Duration::ZERO;
    let mut disconnected = false;

    let persist = |log: &SessionLog, epoch: u32| {
        if let Some(dir) = &cfg.out_dir {
            if let Err(e) = log.write(&dir.join(format!("session-{epoch}"))) {
                eprintln!("cannot write session log: {e}");
            }
        }
    };

    while !ch.stop.load(Ordering::SeqCst) && !disconnected {
        // commands are applied between ticks, while waiting for the deadline
        loop {
            let paused = ch.paused.load(Ordering::SeqCst);
            let wait = if paused {
                Duration::from_millis(20)
            } else {
                deadline.saturating_duration_since(Instant::now())
            };
            if !paused && wait.is_zero() {
                break;
            }
            match ch.inbound.recv_timeout(wait) {
                Ok(msg) => {
                    if let Some(old) = handle(msg, &mut session, &ch, &cfg.scenario, &mut epoch, max_lateness) {
                        persist(&old, epoch - 1);
                        deadline = Instant::now();
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    if paused {
                        // a paused loop owes no ticks
                        deadline = Instant::now();
                        if ch.stop.load(Ordering::SeqCst) {
                            break;
                        }
                    }
                }
                Err(RecvTimeoutError::Disconnected) => {
                    disconnected = true;
                    break;
                }
            }
        }
        if ch.stop.load(Ordering::SeqCst) || disconnected || ch.paused.load(Ordering::SeqCst) {
            continue;
        }

        let lateness = Instant::now().saturating_duration_since(deadline);
        max_lateness = max_lateness.max(lateness);
        let snap = Arc::new(session.tick());
        let _ = ch.frames.send(snap.clone());
        ch.latest.send_replace(Some(snap));

        deadline += period;
        // after a long stall, resume the schedule instead of bursting
        if Instant::now() > deadline + 10 * period {
            deadline = Instant::now();
        }
    }
    let log = session.log(max_lateness);
    persist(&log, epoch);
    log
}

/// Applies one inbound message. Returns the previous session's log when the
/// message was a RESET.
fn handle(
    msg: Inbound,
    session: &mut Session,
    ch: &Channels,
    scenario: &Scenario<f64>,
    epoch: &mut u32,
    max_lateness: Duration,
) -> Option<SessionLog> {
    match msg {
        Inbound::Sim { seq, command, reply } => {
            let tick = session.sim.tick();
            let out = match session.sim.apply_command(command) {
                Ok(()) => ServerMessage::Ack { seq, tick },
                Err(e) => ServerMessage::Error {
                    seq: Some(seq),
                    message: e.to_string(),
                },
            };
            session.refresh_plan();
            let _ = reply.send(out);
            None
        }
        Inbound::Pause { seq, reply } => {
            ch.paused.store(true, Ordering::SeqCst);
            let _ = reply.send(ServerMessage::Ack {
                seq,
                tick: session.sim.tick(),
            });
            None
        }
        Inbound::Resume { seq, reply } => {
            ch.paused.store(false, Ordering::SeqCst);
            let _ = reply.send(ServerMessage::Ack {
                seq,
                tick: session.sim.tick(),
            });
            None
        }
        Inbound::Reset { seq, reply } => {
            let old = session.log(max_lateness);
            *epoch += 1;
            *session = Session::new(scenario, *epoch);
            let _ = reply.send(ServerMessage::Ack { seq, tick: 0 });
            Some(old)
        }
    }
}
