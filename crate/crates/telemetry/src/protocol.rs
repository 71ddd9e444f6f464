//! Wire format. Every WebSocket text message is one JSON object with a
//! `type` field. Server messages use lower-case types, operator commands
//! the upper-case names of [`OperatorCommand`].

use serde::{Deserialize, Serialize};

use hybridnav_core::avoidance::PolarHistogram;
use hybridnav_core::kinematics::{Pose, TrackingError, VelocityCommand};
use hybridnav_core::navigator::Mode;
use hybridnav_core::sim::{Metrics, OperatorCommand};
use hybridnav_core::world::{CellState, OccupancyGrid};

/// Bumped on any incompatible change to the messages below.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    Frame(Box<Frame>),
    /// A command was accepted and applied before tick `tick`.
    Ack { seq: u64, tick: u64 },
    Error { seq: Option<u64>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub schema_version: u32,
    pub scenario: String,
    pub tick_dt: f64,
    pub speed: f64,
    pub paused: bool,
    pub grid: GridInfo,
    pub robot_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub time: f64,
    /// Incremented by RESET; ticks restart from 0 in a new epoch.
    pub epoch: u32,
    pub pose: Pose<f64>,
    pub goal: Pose<f64>,
    pub mode: Mode,
    pub command: VelocityCommand<f64>,
    pub error: TrackingError<f64>,
    pub min_range: f64,
    pub clearance: f64,
    pub events: Vec<String>,
    pub plan_id: u32,
    /// Present on keyframes and whenever `plan_id` changed since the
    /// previous frame sent to this client.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanView>,
    /// Trajectory reference sampled this tick.
    pub reference: Option<Pose<f64>>,
    pub histogram: Option<HistogramView>,
    pub grid: GridUpdate,
    /// FNV-1a over the belief states after this frame, as 16 hex digits.
    pub checksum: String,
    pub obstacles: Vec<ObstacleView>,
    pub metrics: Metrics<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Leading via-points that only leave an inflated zone.
    pub escape_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramView {
    pub sector_width: f64,
    pub first_sector: i64,
    pub circular: bool,
    pub densities: Vec<f64>,
    pub threshold: f64,
    /// Robot-frame bearing of the reference point.
    pub target: Option<f64>,
    /// Chosen steering direction, robot frame.
    pub steering: Option<f64>,
}

impl HistogramView {
    pub fn new(h: &PolarHistogram<f64>, threshold: f64, target: Option<f64>, steering: Option<f64>) -> Self {
        Self {
            sector_width: h.sector_width,
            first_sector: h.first_sector,
            circular: h.circular,
            densities: h.densities.clone(),
            threshold,
            target,
            steering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleView {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Driven by operator commands rather than a script.
    pub external: bool,
}

/// Belief-grid content. Cells are indexed `row * width + col` with row 0
/// at the bottom of the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridUpdate {
    /// Every cell as one character: `.` free, `#` occupied, `?` unknown.
    Keyframe { cells: String },
    /// Changed cells since the previous frame as `[start, len, state]`
    /// runs, state 0 free, 1 occupied, -1 unknown.
    Delta { runs: Vec<(usize, usize, i8)> },
}

pub fn keyframe_cells(states: &[CellState]) -> String {
    states.iter().map(|s| s.as_char()).collect()
}

/// Run-length encodes the cells that differ between two rasters.
pub fn diff_runs(before: &[CellState], after: &[CellState]) -> Vec<(usize, usize, i8)> {
    assert_eq!(before.len(), after.len());
    let mut runs: Vec<(usize, usize, i8)> = Vec::new();
    for (i, (a, b)) in before.iter().zip(after).enumerate() {
        if a == b {
            continue;
        }
        let state = *b as i8;
        match runs.last_mut() {
            Some((start, len, s)) if *start + *len == i && *s == state => *len += 1,
            _ => runs.push((i, 1, state)),
        }
    }
    runs
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("keyframe has {got} cells, expected {expected}")]
    KeyframeSize { got: usize, expected: usize },
    #[error("bad cell character {0:?}")]
    BadCell(char),
    #[error("run [{start}, {len}] exceeds the grid")]
    RunOutOfRange { start: usize, len: usize },
    #[error("bad cell state {0}")]
    BadState(i8),
}

/// Applies a grid update to a client-side raster.
pub fn apply_update(states: &mut [CellState], update: &GridUpdate) -> Result<(), ReplayError> {
    match update {
        GridUpdate::Keyframe { cells } => {
            let n = cells.chars().count();
            if n != states.len() {
                return Err(ReplayError::KeyframeSize {
                    got: n,
                    expected: states.len(),
                });
            }
            for (s, c) in states.iter_mut().zip(cells.chars()) {
                *s = CellState::from_char(c).ok_or(ReplayError::BadCell(c))?;
            }
        }
        GridUpdate::Delta { runs } => {
            for &(start, len, state) in runs {
                let cell = match state {
                    0 => CellState::Free,
                    1 => CellState::Occupied,
                    -1 => CellState::Unknown,
                    other => return Err(ReplayError::BadState(other)),
                };
                let slot = states
                    .get_mut(start..start + len)
                    .ok_or(ReplayError::RunOutOfRange { start, len })?;
                slot.fill(cell);
            }
        }
    }
    Ok(())
}

/// Same FNV-1a as [`OccupancyGrid::state_checksum`], for client rasters.
pub fn checksum_hex(states: &[CellState]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in states {
        h ^= (*s as i8 as u8) as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn grid_checksum_hex(grid: &OccupancyGrid<f64>) -> String {
    format!("{:016x}", grid.state_checksum())
}

/// Commands a client may send.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientCommand {
    Hello { schema_version: u32 },
    Pause,
    Resume,
    Reset,
    Sim(OperatorCommand<f64>),
}

/// A command with its client sequence number (absent only for `HELLO`).
#[derive(Debug, Clone, PartialEq)]
pub struct ClientMessage {
    pub seq: Option<u64>,
    pub command: ClientCommand,
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let seq = match value.get("seq") {
        None | Some(serde_json::Value::Null) => None,
        Some(v) => Some(v.as_u64().ok_or("seq must be a non-negative integer")?),
    };
    let kind = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or("missing string field `type`")?;
    let command = match kind {
        "HELLO" => ClientCommand::Hello {
            schema_version: value
                .get("schema_version")
                .and_then(|v| v.as_u64())
                .ok_or("HELLO needs schema_version")? as u32,
        },
        "PAUSE" => ClientCommand::Pause,
        "RESUME" => ClientCommand::Resume,
        "RESET" => ClientCommand::Reset,
        "ADD_OBSTACLE" | "MOVE_OBSTACLE" | "REMOVE_OBSTACLE" | "SET_GOAL" => ClientCommand::Sim(
            serde_json::from_value(value.clone()).map_err(|e| format!("bad {kind} payload: {e}"))?,
        ),
        other => return Err(format!("unknown command type `{other}`")),
    };
    Ok(ClientMessage { seq, command })
}
