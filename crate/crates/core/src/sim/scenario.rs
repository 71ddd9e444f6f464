//! Scenario documents: map source, start/goal, sensing and navigation
//! configuration, dynamic obstacles and run settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Point, Pose};
use crate::navigator::NavConfig;
use crate::scalar::Real;
use crate::sim::command::LoggedCommand;
use crate::world::{format_map, load_map, parse_map, CellState, OccupancyGrid, ScanSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Where the static map comes from. `file` paths are relative to the
/// scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSource {
    File { file: PathBuf },
    Ascii { ascii: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Waypoint<T: Real> {
    pub t: T,
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "mode", rename_all = "lowercase")]
pub enum Motion<T: Real> {
    /// Piecewise-linear path through timed waypoints, held at the ends.
    Scripted { script: Vec<Waypoint<T>> },
    /// Positioned by operator commands.
    External { x: T, y: T },
}

/// Disc obstacle that exists only in the true world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DynamicObstacle<T: Real> {
    pub id: String,
    pub radius: T,
    /// Simulation time at which the obstacle appears.
    #[serde(default)]
    pub appear_at: T,
    #[serde(flatten)]
    pub motion: Motion<T>,
}

impl<T: Real> DynamicObstacle<T> {
    /// Position at simulation time `t`.
    pub fn position_at(&self, t: T) -> Point<T> {
        match &self.motion {
            Motion::External { x, y } => Point::new(*x, *y),
            Motion::Scripted { script } => interpolate_script(script, t),
        }
    }

    pub fn is_active(&self, t: T) -> bool {
        t >= self.appear_at
    }
}

/// Linear interpolation between timed waypoints, clamped at both ends.
pub fn interpolate_script<T: Real>(script: &[Waypoint<T>], t: T) -> Point<T> {
    let first = script[0];
    if t <= first.t {
        return Point::new(first.x, first.y);
    }
    for w in script.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b.t {
            let s = (t - a.t) / (b.t - a.t);
            return Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
        }
    }
    let last = script[script.len() - 1];
    Point::new(last.x, last.y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct SimConfig<T: Real> {
    pub tick_dt: T,
    pub max_ticks: u64,
    pub seed: u64,
    /// Standard deviation of additive noise on the commanded v, m/s.
    pub sigma_v: T,
    /// Standard deviation of additive noise on the commanded omega, rad/s.
    pub sigma_omega: T,
    /// Operator commands replayed at the start of the given ticks.
    pub commands: Vec<LoggedCommand<T>>,
    /// Keep ticking after ARRIVED/FAILED until `max_ticks`. Recorded live
    /// sessions set this so their replay covers the idle tail too.
    pub hold: bool,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            tick_dt: T::lit(0.05),
            max_ticks: 3000,
            seed: 0,
            sigma_v: T::zero(),
            sigma_omega: T::zero(),
            commands: Vec::new(),
            hold: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scenario<T: Real> {
    #[serde(default)]
    pub name: String,
    pub map: MapSource,
    pub robot_start: Pose<T>,
    pub goal: Pose<T>,
    #[serde(default)]
    pub scan: ScanSpec<T>,
    #[serde(default)]
    pub nav: NavConfig<T>,
    #[serde(default)]
    pub obstacles: Vec<DynamicObstacle<T>>,
    #[serde(default)]
    pub sim: SimConfig<T>,
}

impl<T: Real> Scenario<T> {
    /// Reads a scenario file and resolves a file-backed map into inline
    /// ASCII so the result is self-contained.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut scenario: Scenario<T> = serde_json::from_str(&text)?;
        if scenario.name.is_empty() {
            scenario.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        if let MapSource::File { file } = &scenario.map {
            let base = path.parent().unwrap_or(Path::new("."));
            let map_path = base.join(file);
            let grid: OccupancyGrid<T> = load_map(&map_path)
                .map_err(|e| ScenarioError::Invalid(vec![format!("map.file: {}: {e}", map_path.display())]))?;
            scenario.map = MapSource::Ascii {
                ascii: format_map(&grid),
            };
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario<T> = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// The static true-world map. File sources must be resolved first
    /// (see [`Scenario::load`]).
    pub fn grid(&self) -> Result<OccupancyGrid<T>, ScenarioError> {
        match &self.map {
            MapSource::Ascii { ascii } => {
                parse_map(ascii).map_err(|e| ScenarioError::Invalid(vec![format!("map.ascii: {e}")]))
            }
            MapSource::File { file } => {
                load_map(file).map_err(|e| ScenarioError::Invalid(vec![format!("map.file: {e}")]))
            }
        }
    }

    /// Checks every field, collecting all problems at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(ScenarioError::Invalid(p)) => {
                problems.extend(p);
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(grid) = &grid {
            let mask = crate::world::inflate(grid, self.nav.inflation());
            for (field, pose) in [("robot_start", &self.robot_start), ("goal", &self.goal)] {
                match grid.world_to_cell(pose.position()) {
                    Err(_) => problems.push(format!("{field}: ({}, {}) lies outside the map", pose.x, pose.y)),
                    Ok(cell) if grid.state(cell) != CellState::Free => {
                        problems.push(format!("{field}: ({}, {}) is not in a free cell", pose.x, pose.y))
                    }
                    Ok(cell) if field == "goal" && mask.is_blocked(cell) => problems.push(format!(
                        "goal: ({}, {}) is blocked after inflation by {}",
                        pose.x,
                        pose.y,
                        self.nav.inflation()
                    )),
                    Ok(_) => {}
                }
            }
            for (i, c) in self.sim.commands.iter().enumerate() {
                if let Err(e) = c.command.check_bounds(grid) {
                    problems.push(format!("sim.commands[{i}]: {e}"));
                }
            }
        }
        if let Err(e) = self.scan.validate() {
            problems.push(format!("scan: {e}"));
        }
        problems.extend(self.nav.problems());
        if !(self.sim.tick_dt > T::zero()) {
            problems.push("sim.tick_dt must be > 0".into());
        }
        if self.sim.max_ticks == 0 {
            problems.push("sim.max_ticks must be > 0".into());
        }
        if self.sim.sigma_v < T::zero() || self.sim.sigma_omega < T::zero() {
            problems.push("sim.sigma_v and sim.sigma_omega must be >= 0".into());
        }
        if self.sim.commands.windows(2).any(|w| w[1].tick < w[0].tick) {
            problems.push("sim.commands: ticks must be non-decreasing".into());
        }
        let mut ids = std::collections::HashSet::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            if !ids.insert(o.id.as_str()) {
                problems.push(format!("obstacles[{i}].id: duplicate id `{}`", o.id));
            }
            if !(o.radius > T::zero()) {
                problems.push(format!("obstacles[{i}].radius must be > 0"));
            }
            if let Motion::Scripted { script } = &o.motion {
                if script.is_empty() {
                    problems.push(format!("obstacles[{i}].script must not be empty"));
                }
                if script.windows(2).any(|w| !(w[1].t > w[0].t)) {
                    problems.push(format!("obstacles[{i}].script: times must be strictly increasing"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(problems))
        }
    }
}
