//! Occupancy-grid environment model.
//!
//! The grid stores a clamped log-odds belief per cell plus a flag recording
//! whether the cell has ever been observed. The discrete [`CellState`] is
//! derived from those two values only. Storage is row-major with row 0 at
//! the bottom (the grid origin is the lower-left corner of cell `(0, 0)`).

mod inflate;
mod mapio;
mod raycast;

pub use inflate::{inflate, PlanningMask};
pub use mapio::{format_map, load_map, parse_map, save_map};
pub use raycast::{raycast_scan, update_from_scan, RangeScan, ScanSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Point;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("pose lies inside an occupied cell")]
    PoseInObstacle,
    #[error("invalid scan spec: {0}")]
    InvalidScanSpec(&'static str),
    #[error("scan does not match the scan spec ({got} ranges, expected {expected})")]
    ScanMismatch { got: usize, expected: usize },
    #[error("map parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Discrete cell state. The integer values follow the usual map convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum CellState {
    Free = 0,
    Occupied = 1,
    Unknown = -1,
}

impl CellState {
    pub fn as_char(self) -> char {
        match self {
            CellState::Free => '.',
            CellState::Occupied => '#',
            CellState::Unknown => '?',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellState::Free),
            '#' => Some(CellState::Occupied),
            '?' => Some(CellState::Unknown),
            _ => None,
        }
    }
}

/// Cell index, `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Raster dimensions and placement in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridGeometry<T: Real> {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: T,
    /// World position of the lower-left corner of cell `(0, 0)`.
    pub origin: Point<T>,
}

impl<T: Real> GridGeometry<T> {
    pub fn new(width: usize, height: usize, resolution: T, origin: Point<T>) -> Self {
        assert!(resolution > T::zero(), "grid resolution must be positive");
        Self {
            width,
            height,
            resolution,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_of_index(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    pub fn contains_cell(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// `floor((p - origin) / resolution)`, or `OutOfBounds`.
    pub fn world_to_cell(&self, p: Point<T>) -> Result<Cell, WorldError> {
        let (c, r) = self.world_to_cell_unchecked(p);
        if self.contains_cell(c, r) {
            Ok(Cell::new(c as usize, r as usize))
        } else {
            Err(WorldError::OutOfBounds {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
            })
        }
    }

    /// Cell coordinates without the bounds check; may be negative.
    pub fn world_to_cell_unchecked(&self, p: Point<T>) -> (i64, i64) {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        (
            c.to_i64().unwrap_or(i64::MIN),
            r.to_i64().unwrap_or(i64::MIN),
        )
    }

    pub fn cell_center(&self, cell: Cell) -> Point<T> {
        let half = T::lit(0.5);
        Point::new(
            self.origin.x + (T::from_usize_lossy(cell.col) + half) * self.resolution,
            self.origin.y + (T::from_usize_lossy(cell.row) + half) * self.resolution,
        )
    }

    pub fn contains_point(&self, p: Point<T>) -> bool {
        self.world_to_cell(p).is_ok()
    }

    /// World-frame extent `(max_x, max_y)`.
    pub fn upper_corner(&self) -> Point<T> {
        Point::new(
            self.origin.x + T::from_usize_lossy(self.width) * self.resolution,
            self.origin.y + T::from_usize_lossy(self.height) * self.resolution,
        )
    }
}

/// Log-odds increments, state thresholds and clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogOddsParams<T: Real> {
    pub l_hit: T,
    pub l_miss: T,
    /// Above this a cell is OCCUPIED.
    pub occupied_above: T,
    /// Below this a cell is FREE.
    pub free_below: T,
    pub clamp: T,
}

impl<T: Real> Default for LogOddsParams<T> {
    fn default() -> Self {
        Self {
            l_hit: T::lit(0.85),
            l_miss: T::lit(-0.4),
            occupied_above: T::lit(2.0),
            free_below: T::lit(-2.0),
            clamp: T::lit(5.0),
        }
    }
}

impl<T: Real> LogOddsParams<T> {
    pub fn state_of(&self, log_odds: T, observed: bool) -> CellState {
        if !observed {
            CellState::Unknown
        } else if log_odds > self.occupied_above {
            CellState::Occupied
        } else if log_odds < self.free_below {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OccupancyGrid<T: Real> {
    geometry: GridGeometry<T>,
    params: LogOddsParams<T>,
    states: Vec<CellState>,
    log_odds: Vec<T>,
    observed: Vec<bool>,
}

impl<T: Real> OccupancyGrid<T> {
    /// A grid where every cell is UNKNOWN.
    pub fn new_unknown(geometry: GridGeometry<T>) -> Self {
        let n = geometry.len();
        Self {
            geometry,
            params: LogOddsParams::default(),
            states: vec![CellState::Unknown; n],
            log_odds: vec![T::zero(); n],
            observed: vec![false; n],
        }
    }

    /// A grid where every cell is confidently FREE.
    pub fn new_free(geometry: GridGeometry<T>) -> Self {
        let mut g = Self::new_unknown(geometry);
        g.fill(CellState::Free);
        g
    }

    pub fn with_params(mut self, params: LogOddsParams<T>) -> Self {
        self.params = params;
        for i in 0..self.states.len() {
            self.log_odds[i] = self.log_odds[i].max(-params.clamp).min(params.clamp);
            self.states[i] = params.state_of(self.log_odds[i], self.observed[i]);
        }
        self
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn params(&self) -> &LogOddsParams<T> {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> T {
        self.geometry.resolution
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    pub fn log_odds_raster(&self) -> &[T] {
        &self.log_odds
    }

    pub fn state(&self, cell: Cell) -> CellState {
        self.states[self.geometry.index(cell)]
    }

    pub fn log_odds(&self, cell: Cell) -> T {
        self.log_odds[self.geometry.index(cell)]
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.state(cell) == CellState::Occupied
    }

    pub fn world_to_cell(&self, p: Point<T>) -> Result<Cell, WorldError> {
        self.geometry.world_to_cell(p)
    }

    pub fn cell_center(&self, cell: Cell) -> Point<T> {
        self.geometry.cell_center(cell)
    }

    /// Overwrites a cell with a saturated belief for `state`.
    pub fn set_state(&mut self, cell: Cell, state: CellState) {
        let i = self.geometry.index(cell);
        let (lo, obs) = match state {
            CellState::Free => (-self.params.clamp, true),
            CellState::Occupied => (self.params.clamp, true),
            CellState::Unknown => (T::zero(), false),
        };
        self.log_odds[i] = lo;
        self.observed[i] = obs;
        self.states[i] = state;
    }

    pub fn fill(&mut self, state: CellState) {
        for idx in 0..self.states.len() {
            let cell = self.geometry.cell_of_index(idx);
            self.set_state(cell, state);
        }
    }

    /// Marks every cell whose center lies in the axis-aligned box.
    pub fn fill_rect(&mut self, min: Point<T>, max: Point<T>, state: CellState) {
        for idx in 0..self.states.len() {
            let cell = self.geometry.cell_of_index(idx);
            let c = self.geometry.cell_center(cell);
            if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                self.set_state(cell, state);
            }
        }
    }

    /// Marks every cell whose center lies within `radius` of `center`.
    pub fn fill_disc(&mut self, center: Point<T>, radius: T, state: CellState) {
        for cell in self.cells_in_disc(center, radius) {
            self.set_state(cell, state);
        }
    }

    pub(crate) fn cells_in_disc(&self, center: Point<T>, radius: T) -> Vec<Cell> {
        let g = &self.geometry;
        let (c0, r0) = g.world_to_cell_unchecked(Point::new(center.x - radius, center.y - radius));
        let (c1, r1) = g.world_to_cell_unchecked(Point::new(center.x + radius, center.y + radius));
        let mut out = Vec::new();
        for r in r0.max(0)..=r1.min(g.height as i64 - 1) {
            for c in c0.max(0)..=c1.min(g.width as i64 - 1) {
                let cell = Cell::new(c as usize, r as usize);
                if g.cell_center(cell).distance(&center) <= radius {
                    out.push(cell);
                }
            }
        }
        out
    }

    /// Adds a log-odds increment, clamping and refreshing the derived state.
    pub(crate) fn apply_log_odds(&mut self, idx: usize, delta: T) {
        let p = self.params;
        let lo = (self.log_odds[idx] + delta).max(-p.clamp).min(p.clamp);
        self.log_odds[idx] = lo;
        self.observed[idx] = true;
        self.states[idx] = p.state_of(lo, true);
    }

    /// Cheap order-sensitive checksum over the discrete states (FNV-1a).
    pub fn state_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for s in &self.states {
            h ^= (*s as i8 as u8) as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
