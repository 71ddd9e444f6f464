//! Operator commands that mutate a running simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Point;
use crate::navigator::FailReason;
use crate::scalar::Real;
use crate::world::OccupancyGrid;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum CommandError {
    #[error("position ({x}, {y}) lies outside the world")]
    OutOfBounds { x: f64, y: f64 },
    #[error("radius must be positive and finite")]
    BadRadius,
    #[error("obstacle `{0}` already exists")]
    DuplicateId(String),
    #[error("no obstacle with id `{0}`")]
    UnknownId(String),
    #[error("obstacle `{0}` follows a script and cannot be moved")]
    NotExternal(String),
    #[error("goal rejected: {0}")]
    GoalRejected(String),
}

/// Commands that change simulation state. Loop control (pause, resume,
/// reset) lives with whoever drives the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OperatorCommand<T: Real> {
    AddObstacle { id: String, x: T, y: T, radius: T },
    MoveObstacle { id: String, x: T, y: T },
    RemoveObstacle { id: String },
    SetGoal {
        x: T,
        y: T,
        #[serde(default)]
        theta: T,
    },
}

impl<T: Real> OperatorCommand<T> {
    pub fn position(&self) -> Option<Point<T>> {
        match self {
            OperatorCommand::AddObstacle { x, y, .. }
            | OperatorCommand::MoveObstacle { x, y, .. }
            | OperatorCommand::SetGoal { x, y, .. } => Some(Point::new(*x, *y)),
            OperatorCommand::RemoveObstacle { .. } => None,
        }
    }

    /// Static checks that need only the world bounds.
    pub fn check_bounds(&self, grid: &OccupancyGrid<T>) -> Result<(), CommandError> {
        if let Some(p) = self.position() {
            if !(p.x.is_finite() && p.y.is_finite()) || !grid.geometry().contains_point(p) {
                return Err(CommandError::OutOfBounds {
                    x: p.x.as_f64(),
                    y: p.y.as_f64(),
                });
            }
        }
        if let OperatorCommand::AddObstacle { radius, .. } = self {
            if !(radius.is_finite() && *radius > T::zero()) {
                return Err(CommandError::BadRadius);
            }
        }
        Ok(())
    }
}

impl From<FailReason> for CommandError {
    fn from(r: FailReason) -> Self {
        CommandError::GoalRejected(r.to_string())
    }
}

/// A command together with the tick at whose start it was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LoggedCommand<T: Real> {
    pub tick: u64,
    pub command: OperatorCommand<T>,
}
