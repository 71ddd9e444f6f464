use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::kinematics::{Pose, TrackingError, VelocityCommand};
use crate::navigator::Mode;
use crate::planner::PathPlan;
use crate::scalar::Real;
use crate::sim::command::LoggedCommand;
use crate::trajectory::QuinticTrajectory;

pub const TRACE_HEADER: &str = "tick,mode,min_range,e1,e2,e3,v,omega,event,time,x,y,theta,clearance";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Arrived,
    Failed,
    #[default]
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Arrived => "ARRIVED",
            Outcome::Failed => "FAILED",
            Outcome::Timeout => "TIMEOUT",
        }
    }
}

/// One tick: the pose the robot sensed from and the command it then
/// executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TickRecord<T: Real> {
    pub tick: u64,
    pub time: T,
    pub pose: Pose<T>,
    pub command: VelocityCommand<T>,
    pub mode: Mode,
    pub error: TrackingError<T>,
    pub min_range: T,
    /// True distance from the robot center to the nearest obstacle surface.
    pub clearance: T,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CommittedPlan<T: Real> {
    pub tick: u64,
    pub time: T,
    pub plan_id: u32,
    pub escape_len: usize,
    pub plan: PathPlan<T>,
    pub trajectory: QuinticTrajectory<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Metrics<T: Real> {
    pub run_time: T,
    /// Executed path length, meters.
    pub path_length: T,
    pub min_clearance: T,
    pub replan_count: u32,
    pub avoid_tick_fraction: T,
    /// Largest tracking-error norm over all ticks.
    pub max_error: T,
    /// Ticks on which the robot footprint overlapped an obstacle.
    pub collisions: u32,
    pub ticks: u64,
    pub avoiding_ticks: u64,
    pub final_goal_distance: T,
}

impl<T: Real> Default for Metrics<T> {
    fn default() -> Self {
        Self {
            run_time: T::zero(),
            path_length: T::zero(),
            min_clearance: T::infinity(),
            replan_count: 0,
            avoid_tick_fraction: T::zero(),
            max_error: T::zero(),
            collisions: 0,
            ticks: 0,
            avoiding_ticks: 0,
            final_goal_distance: T::zero(),
        }
    }
}

impl<T: Real> Metrics<T> {
    pub(crate) fn absorb(&mut self, r: &TickRecord<T>, robot_radius: T) {
        self.min_clearance = self.min_clearance.min(r.clearance);
        if r.clearance < robot_radius {
            self.collisions += 1;
        }
        if r.mode == Mode::Avoiding {
            self.avoiding_ticks += 1;
        }
        self.replan_count += r.events.iter().filter(|e| e.starts_with("REPLANNING")).count() as u32;
        self.max_error = self.max_error.max(r.error.position_norm());
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SimTrace<T: Real> {
    pub records: Vec<TickRecord<T>>,
    pub plans: Vec<CommittedPlan<T>>,
    pub commands: Vec<LoggedCommand<T>>,
    pub metrics: Metrics<T>,
    pub outcome: Outcome,
    pub fail_reason: Option<String>,
}

impl<T: Real> SimTrace<T> {
    /// Per-tick CSV with [`TRACE_HEADER`]; floats use six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(96 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            write_record(&mut out, r);
        }
        out
    }

    pub fn events(&self) -> impl Iterator<Item = (u64, &str)> + '_ {
        self.records
            .iter()
            .flat_map(|r| r.events.iter().map(move |e| (r.tick, e.as_str())))
    }
}

pub(crate) fn write_record<T: Real>(out: &mut String, r: &TickRecord<T>) {
    let f = |v: T| v.as_f64();
    let _ = writeln!(
        out,
        "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
        r.tick,
        r.mode,
        f(r.min_range),
        f(r.error.e1),
        f(r.error.e2),
        f(r.error.e3),
        f(r.command.v),
        f(r.command.omega),
        r.events.join("|"),
        f(r.time),
        f(r.pose.x),
        f(r.pose.y),
        f(r.pose.theta),
        f(r.clearance),
    );
}
