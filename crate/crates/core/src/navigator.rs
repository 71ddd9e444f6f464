//! Mode-switching executor tying planning, tracking and avoidance together.
//!
//! Each tick the navigator checks arrival, decides between trajectory
//! tracking and VFH avoidance from the nearest range reading, and re-plans
//! when the tracking error grows past its threshold, when no admissible
//! valley exists, or when the trajectory clock overruns.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::avoidance::{
    build_histogram, local_target, select_steering, smooth_command, steer_to_command, IirState, PolarHistogram,
    Steering, VfhParams,
};
use crate::kinematics::{
    control_law, desired_velocities, tracking_error, ControlGains, LawVariant, Limits, Point, Pose, TrackingError,
    VelocityCommand,
};
use crate::planner::{plan_cells, PathPlan, PlanError};
use crate::scalar::Real;
use crate::trajectory::{fit_trajectory, QuinticTrajectory, TrajectoryConfig, TrajectorySample};
use crate::world::{inflate, Cell, CellState, OccupancyGrid, PlanningMask, RangeScan};

/// Which parts of the stack drive the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Global plan plus local avoidance.
    #[default]
    Hybrid,
    /// Local avoidance steering straight at the goal, no global plan.
    VfhOnly,
    /// Trajectory tracking with re-planning but no local avoidance.
    AstarOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Hybrid, Strategy::VfhOnly, Strategy::AstarOnly];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Hybrid => "hybrid",
            Strategy::VfhOnly => "vfh-only",
            Strategy::AstarOnly => "astar-only",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected hybrid, vfh-only or astar-only)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Tracking,
    Avoiding,
    Replanning,
    Arrived,
    Failed,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Tracking => "TRACKING",
            Mode::Avoiding => "AVOIDING",
            Mode::Replanning => "REPLANNING",
            Mode::Arrived => "ARRIVED",
            Mode::Failed => "FAILED",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Mode::Arrived | Mode::Failed)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    StartBlocked,
    GoalBlocked,
    NoPath,
    Trajectory(String),
    NoValley,
}

impl From<PlanError> for FailReason {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::StartBlocked => FailReason::StartBlocked,
            PlanError::GoalBlocked => FailReason::GoalBlocked,
            PlanError::NoPath => FailReason::NoPath,
        }
    }
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::StartBlocked => f.write_str("StartBlocked"),
            FailReason::GoalBlocked => f.write_str("GoalBlocked"),
            FailReason::NoPath => f.write_str("NoPath"),
            FailReason::Trajectory(m) => write!(f, "Trajectory({m})"),
            FailReason::NoValley => f.write_str("NoValley"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanReason {
    TrackingError,
    NoValley,
    Overrun,
    PlanRetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum NavEvent {
    Planned { plan_id: u32, via_points: usize },
    Replanning { reason: ReplanReason },
    PlanFailed { reason: FailReason },
    EnterAvoiding,
    ExitAvoiding,
    SharpTurn,
    Arrived,
    Failed { reason: FailReason },
}

impl fmt::Display for NavEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NavEvent::Planned { plan_id, via_points } => write!(f, "planned:{plan_id}:{via_points}"),
            NavEvent::Replanning { reason } => {
                let r = match reason {
                    ReplanReason::TrackingError => "tracking_error",
                    ReplanReason::NoValley => "no_valley",
                    ReplanReason::Overrun => "overrun",
                    ReplanReason::PlanRetry => "plan_retry",
                };
                write!(f, "REPLANNING:{r}")
            }
            NavEvent::PlanFailed { reason } => write!(f, "plan_failed:{reason}"),
            NavEvent::EnterAvoiding => f.write_str("enter_avoiding"),
            NavEvent::ExitAvoiding => f.write_str("exit_avoiding"),
            NavEvent::SharpTurn => f.write_str("sharp_turn"),
            NavEvent::Arrived => f.write_str("ARRIVED"),
            NavEvent::Failed { reason } => write!(f, "FAILED:{reason}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct NavThresholds<T: Real> {
    /// Tracking-error norm that triggers re-planning, meters.
    pub e_replan: T,
    /// Arrival radius, meters.
    pub r_goal: T,
    /// Time allowed past the trajectory end before re-planning, seconds.
    pub t_overrun_max: T,
    /// Consecutive planning/valley failures tolerated before giving up.
    pub n_fail: u32,
    /// Minimum spacing of failure-driven re-plan attempts, seconds.
    pub retry_interval: T,
}

impl<T: Real> Default for NavThresholds<T> {
    fn default() -> Self {
        Self {
            e_replan: T::lit(0.5),
            r_goal: T::lit(0.15),
            t_overrun_max: T::lit(5.0),
            n_fail: 3,
            retry_interval: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct NavConfig<T: Real> {
    pub strategy: Strategy,
    pub gains: ControlGains<T>,
    pub limits: Limits<T>,
    pub law: LawVariant,
    pub trajectory: TrajectoryConfig<T>,
    pub vfh: VfhParams<T>,
    pub iir_a1: T,
    pub iir_b0: T,
    pub thresholds: NavThresholds<T>,
    pub robot_radius: T,
    /// Obstacle growth for planning; `robot_radius + 0.1` when absent.
    pub inflation_radius: Option<T>,
}

impl<T: Real> Default for NavConfig<T> {
    fn default() -> Self {
        Self {
            strategy: Strategy::Hybrid,
            gains: ControlGains::default(),
            limits: Limits::default(),
            law: LawVariant::default(),
            trajectory: TrajectoryConfig::default(),
            vfh: VfhParams::default(),
            iir_a1: T::lit(0.7),
            iir_b0: T::lit(0.3),
            thresholds: NavThresholds::default(),
            robot_radius: T::lit(0.25),
            inflation_radius: None,
        }
    }
}

impl<T: Real> NavConfig<T> {
    pub fn inflation(&self) -> T {
        self.inflation_radius
            .unwrap_or(self.robot_radius + T::lit(0.1))
    }

    /// Field-level problems with the configuration.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gains.validate().is_err() {
            out.push("nav.gains: k1, k2, k3 must be > 0".into());
        }
        if !(self.limits.v_max > T::zero() && self.limits.omega_max > T::zero()) {
            out.push("nav.limits: v_max and omega_max must be > 0".into());
        }
        if !(self.trajectory.time_scale > T::zero()) {
            out.push("nav.trajectory.time_scale must be > 0".into());
        }
        if IirState::new(self.iir_a1, self.iir_b0).is_err() {
            out.push("nav.iir: need a1 + b0 = 1 and 0 <= a1 < 1".into());
        }
        let v = &self.vfh;
        if !(v.threshold > T::zero()) || v.s_max == 0 || !(v.v_const > T::zero()) || !(v.sector_width > T::zero()) {
            out.push("nav.vfh: threshold, s_max, v_const and sector_width must be > 0".into());
        }
        if !(v.d_near > self.robot_radius) {
            out.push("nav.vfh.d_near must exceed robot_radius".into());
        }
        let t = &self.thresholds;
        if !(t.r_goal > T::zero() && t.e_replan > t.r_goal && t.t_overrun_max > T::zero()) {
            out.push("nav.thresholds: need 0 < r_goal < e_replan and t_overrun_max > 0".into());
        }
        if !(self.robot_radius > T::zero()) || self.inflation() < T::zero() {
            out.push("nav.robot_radius must be > 0 and inflation_radius >= 0".into());
        }
        out
    }
}

/// Per-tick values exposed for logging and telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepDiagnostics<T: Real> {
    pub min_range: T,
    pub error: TrackingError<T>,
    pub reference: Option<TrajectorySample<T>>,
    pub histogram: Option<PolarHistogram<T>>,
    pub target_bearing: Option<T>,
    pub steering: Option<Steering<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T: Real> {
    pub command: VelocityCommand<T>,
    pub mode: Mode,
    pub events: Vec<NavEvent>,
    pub diagnostics: StepDiagnostics<T>,
}

/// Navigator state. Owned by the simulation loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NavState<T: Real> {
    pub mode: Mode,
    pub goal: Pose<T>,
    pub plan: Option<PathPlan<T>>,
    /// Leading via-points of `plan` that escape the inflated zone the robot
    /// started in; they are not part of the A* search result.
    pub escape_len: usize,
    pub trajectory: Option<QuinticTrajectory<T>>,
    pub plan_id: u32,
    pub t_traj: T,
    pub iir: IirState<T>,
    pub fail_count: u32,
    pub retry_timer: T,
    pub fail_reason: Option<FailReason>,
    pub last_command: VelocityCommand<T>,
    pub last_bearing: T,
}

#[derive(Debug, Clone)]
pub struct Navigator<T: Real> {
    pub config: NavConfig<T>,
    pub state: NavState<T>,
}

impl<T: Real> Navigator<T> {
    pub fn new(config: NavConfig<T>, goal: Pose<T>) -> Self {
        let mode = match config.strategy {
            Strategy::VfhOnly => Mode::Avoiding,
            _ => Mode::Replanning,
        };
        Self {
            state: NavState {
                mode,
                goal,
                plan: None,
                escape_len: 0,
                trajectory: None,
                plan_id: 0,
                t_traj: T::zero(),
                iir: IirState {
                    a1: config.iir_a1,
                    b0: config.iir_b0,
                    omega_prev: T::zero(),
                },
                fail_count: 0,
                retry_timer: T::zero(),
                fail_reason: None,
                last_command: VelocityCommand::zero(),
                last_bearing: T::zero(),
            },
            config,
        }
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn planning_mask(&self, grid: &OccupancyGrid<T>) -> PlanningMask<T> {
        inflate(grid, self.config.inflation())
    }

    /// Plans from `pose` to the current goal and commits the resulting
    /// trajectory; on failure the mode becomes FAILED.
    pub fn plan_and_commit(&mut self, grid: &OccupancyGrid<T>, pose: &Pose<T>) -> Result<(), FailReason> {
        let result = self.try_plan(grid, pose);
        match &result {
            Ok(()) => {}
            Err(reason) => {
                self.state.mode = Mode::Failed;
                self.state.fail_reason = Some(reason.clone());
            }
        }
        result
    }

    /// Replaces the goal and plans toward it. Leaves the navigator unchanged
    /// when planning fails.
    pub fn set_goal(&mut self, grid: &OccupancyGrid<T>, pose: &Pose<T>, goal: Pose<T>) -> Result<(), FailReason> {
        let mut next = self.clone();
        next.state.goal = goal;
        next.state.fail_count = 0;
        next.state.fail_reason = None;
        if next.config.strategy == Strategy::VfhOnly {
            next.state.mode = Mode::Avoiding;
        } else {
            next.try_plan(grid, pose)?;
        }
        *self = next;
        Ok(())
    }

    fn try_plan(&mut self, grid: &OccupancyGrid<T>, pose: &Pose<T>) -> Result<(), FailReason> {
        let mask = self.planning_mask(grid);
        let geom = *mask.geometry();
        let goal_cell = geom
            .world_to_cell(self.state.goal.position())
            .map_err(|_| FailReason::GoalBlocked)?;
        if mask.is_blocked(goal_cell) {
            return Err(FailReason::GoalBlocked);
        }
        let robot_cell = geom.world_to_cell(pose.position()).map_err(|_| FailReason::StartBlocked)?;
        let escape = escape_route(grid, &mask, robot_cell).ok_or(FailReason::StartBlocked)?;
        let search_start = *escape.last().unwrap();
        let found: PathPlan<T> = plan_cells(&mask, search_start, goal_cell)?;

        let mut cells = escape[..escape.len() - 1].to_vec();
        let escape_len = cells.len();
        cells.extend(found.cells.iter().copied());
        let (xs, ys): (Vec<T>, Vec<T>) = cells
            .iter()
            .map(|c| {
                let p = geom.cell_center(*c);
                (p.x, p.y)
            })
            .unzip();
        let plan = PathPlan {
            xs,
            ys,
            cells,
            cost: found.cost,
        };

        let mut points: Vec<Point<T>> = plan.points().collect();
        points[0] = pose.position();
        let last = points.len() - 1;
        if last > 0 {
            points[last] = self.state.goal.position();
        } else {
            points.push(self.state.goal.position());
        }
        let (traj, _) = fit_trajectory(&points, pose.position(), &self.config.trajectory)
            .map_err(|e| FailReason::Trajectory(e.to_string()))?;

        let s = &mut self.state;
        s.plan = Some(plan);
        s.escape_len = escape_len;
        s.trajectory = Some(traj);
        s.plan_id += 1;
        s.t_traj = T::zero();
        s.mode = Mode::Tracking;
        s.fail_reason = None;
        Ok(())
    }

    /// One control tick: returns exactly one command.
    pub fn step(&mut self, pose: &Pose<T>, scan: &RangeScan<T>, grid: &OccupancyGrid<T>, dt: T) -> StepOutput<T> {
        let mut events = Vec::new();
        let mut diag = StepDiagnostics {
            min_range: scan.min_range(),
            error: TrackingError::default(),
            reference: None,
            histogram: None,
            target_bearing: None,
            steering: None,
        };
        let command = self.decide(pose, scan, grid, dt, &mut events, &mut diag);
        let command = command.saturate(&self.config.limits);
        self.state.last_command = command;
        if let Some(traj) = &self.state.trajectory {
            let cap = traj.t_f + self.config.thresholds.t_overrun_max;
            self.state.t_traj = (self.state.t_traj + dt).min(cap);
        }
        StepOutput {
            command,
            mode: self.state.mode,
            events,
            diagnostics: diag,
        }
    }

    fn decide(
        &mut self,
        pose: &Pose<T>,
        scan: &RangeScan<T>,
        grid: &OccupancyGrid<T>,
        dt: T,
        events: &mut Vec<NavEvent>,
        diag: &mut StepDiagnostics<T>,
    ) -> VelocityCommand<T> {
        if self.state.mode.is_terminal() {
            return VelocityCommand::zero();
        }
        if pose.position().distance(&self.state.goal.position()) <= self.config.thresholds.r_goal {
            if let Some(traj) = &self.state.trajectory {
                diag.error = tracking_error(pose, &traj.sample(self.state.t_traj).reference);
            }
            self.state.mode = Mode::Arrived;
            events.push(NavEvent::Arrived);
            return VelocityCommand::zero();
        }
        if self.config.strategy == Strategy::VfhOnly {
            return self.vfh_only(pose, scan, events, diag);
        }

        if self.state.mode == Mode::Replanning {
            self.state.retry_timer -= dt;
            if self.state.retry_timer > T::zero() {
                return VelocityCommand::zero();
            }
            events.push(NavEvent::Replanning {
                reason: ReplanReason::PlanRetry,
            });
            if !self.replan(grid, pose, events) {
                return VelocityCommand::zero();
            }
        }

        let thresholds = self.config.thresholds;
        let overrun = self
            .state
            .trajectory
            .as_ref()
            .map_or(true, |t| self.state.t_traj >= t.t_f + thresholds.t_overrun_max);
        if overrun {
            events.push(NavEvent::Replanning {
                reason: ReplanReason::Overrun,
            });
            if !self.replan(grid, pose, events) {
                return VelocityCommand::zero();
            }
        }

        let min_range = diag.min_range;
        let vfh = self.config.vfh;
        if self.config.strategy == Strategy::Hybrid {
            let was_avoiding = self.state.mode == Mode::Avoiding;
            let avoid = if was_avoiding {
                min_range <= vfh.d_near + vfh.hysteresis
            } else {
                min_range < vfh.d_near
            };
            if avoid && !was_avoiding {
                self.state.mode = Mode::Avoiding;
                self.state.iir.reset(self.state.last_command.omega);
                events.push(NavEvent::EnterAvoiding);
            } else if !avoid && was_avoiding {
                self.state.mode = Mode::Tracking;
                events.push(NavEvent::ExitAvoiding);
            }
        }

        let mut sample = self.reference();
        diag.error = tracking_error(pose, &sample.reference);
        if diag.error.position_norm() > thresholds.e_replan {
            events.push(NavEvent::Replanning {
                reason: ReplanReason::TrackingError,
            });
            if !self.replan(grid, pose, events) {
                return VelocityCommand::zero();
            }
            if self.config.strategy == Strategy::Hybrid && min_range < vfh.d_near {
                self.state.mode = Mode::Avoiding;
            }
            sample = self.reference();
            diag.error = tracking_error(pose, &sample.reference);
        }
        diag.reference = Some(sample);

        if self.state.mode == Mode::Avoiding {
            let target = sample.reference.position();
            let bearing = local_target(pose, target).unwrap_or(self.state.last_bearing);
            self.state.last_bearing = bearing;
            match self.avoid(scan, bearing, events, diag) {
                Some(cmd) => {
                    self.state.fail_count = 0;
                    cmd
                }
                None => {
                    self.state.fail_count += 1;
                    if self.state.fail_count > thresholds.n_fail {
                        self.fail(FailReason::NoValley, events);
                    } else {
                        events.push(NavEvent::Replanning {
                            reason: ReplanReason::NoValley,
                        });
                        self.state.mode = Mode::Replanning;
                        self.state.retry_timer = thresholds.retry_interval;
                    }
                    VelocityCommand::zero()
                }
            }
        } else {
            self.state.fail_count = 0;
            let (v_d, w_d) = desired_velocities(
                sample.vel.x,
                sample.vel.y,
                sample.acc.x,
                sample.acc.y,
                self.config.trajectory.eps_vel,
            )
            .unwrap_or((self.config.trajectory.eps_vel, T::zero()));
            let (v_d, w_d) = if self.config.trajectory.reverse { (-v_d, w_d) } else { (v_d, w_d) };
            control_law(&diag.error, v_d, w_d, &self.config.gains, &self.config.limits, self.config.law)
        }
    }

    fn reference(&self) -> TrajectorySample<T> {
        self.state
            .trajectory
            .as_ref()
            .expect("committed trajectory")
            .sample(self.state.t_traj)
    }

    /// Histogram, valley choice and filtered arc command, or `None` when no
    /// valley is admissible.
    fn avoid(
        &mut self,
        scan: &RangeScan<T>,
        bearing: T,
        events: &mut Vec<NavEvent>,
        diag: &mut StepDiagnostics<T>,
    ) -> Option<VelocityCommand<T>> {
        let vfh = self.config.vfh;
        let hist = build_histogram(scan, &vfh);
        let choice = select_steering(&hist, bearing, &vfh);
        diag.histogram = Some(hist);
        diag.target_bearing = Some(bearing);
        let steering = choice.ok()?;
        diag.steering = Some(steering);
        let (raw, sharp) = steer_to_command(steering.angle, &vfh);
        if sharp {
            events.push(NavEvent::SharpTurn);
        }
        let omega = smooth_command(raw.omega, &mut self.state.iir);
        Some(VelocityCommand::new(raw.v, omega))
    }

    fn vfh_only(
        &mut self,
        pose: &Pose<T>,
        scan: &RangeScan<T>,
        events: &mut Vec<NavEvent>,
        diag: &mut StepDiagnostics<T>,
    ) -> VelocityCommand<T> {
        let bearing = local_target(pose, self.state.goal.position()).unwrap_or(self.state.last_bearing);
        self.state.last_bearing = bearing;
        match self.avoid(scan, bearing, events, diag) {
            Some(cmd) => {
                self.state.fail_count = 0;
                cmd
            }
            None => {
                self.state.fail_count += 1;
                if self.state.fail_count > self.config.thresholds.n_fail {
                    self.fail(FailReason::NoValley, events);
                }
                VelocityCommand::zero()
            }
        }
    }

    /// Re-plans from `pose`. On failure the navigator waits in REPLANNING
    /// for the retry interval, or fails for good after `n_fail` attempts.
    fn replan(&mut self, grid: &OccupancyGrid<T>, pose: &Pose<T>, events: &mut Vec<NavEvent>) -> bool {
        let was_avoiding = self.state.mode == Mode::Avoiding;
        match self.try_plan(grid, pose) {
            Ok(()) => {
                if was_avoiding {
                    self.state.mode = Mode::Avoiding;
                }
                events.push(NavEvent::Planned {
                    plan_id: self.state.plan_id,
                    via_points: self.state.plan.as_ref().map_or(0, |p| p.len()),
                });
                true
            }
            Err(reason) => {
                self.state.fail_count += 1;
                events.push(NavEvent::PlanFailed { reason: reason.clone() });
                if self.state.fail_count > self.config.thresholds.n_fail {
                    self.fail(reason, events);
                } else {
                    self.state.mode = Mode::Replanning;
                    self.state.retry_timer = self.config.thresholds.retry_interval;
                }
                false
            }
        }
    }

    fn fail(&mut self, reason: FailReason, events: &mut Vec<NavEvent>) {
        self.state.mode = Mode::Failed;
        self.state.fail_reason = Some(reason.clone());
        events.push(NavEvent::Failed { reason });
    }
}

/// Cells leading from `start` to the nearest cell that is free in `mask`,
/// moving only through cells not OCCUPIED in `grid` (the start itself may
/// be occupied). Returns `[start]` when the start is free.
pub fn escape_route<T: Real>(grid: &OccupancyGrid<T>, mask: &PlanningMask<T>, start: Cell) -> Option<Vec<Cell>> {
    if !mask.is_blocked(start) {
        return Some(vec![start]);
    }
    let geom = *mask.geometry();
    let mut parent = vec![usize::MAX; geom.len()];
    let s = geom.index(start);
    parent[s] = s;
    let mut queue = VecDeque::from([start]);
    while let Some(cell) = queue.pop_front() {
        for (dc, dr) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let c = cell.col as i64 + dc;
            let r = cell.row as i64 + dr;
            if !geom.contains_cell(c, r) {
                continue;
            }
            let next = Cell::new(c as usize, r as usize);
            let ni = geom.index(next);
            if parent[ni] != usize::MAX || grid.state(next) == CellState::Occupied {
                continue;
            }
            if dc != 0 && dr != 0 {
                let side_a = Cell::new(c as usize, cell.row);
                let side_b = Cell::new(cell.col, r as usize);
                if grid.state(side_a) == CellState::Occupied || grid.state(side_b) == CellState::Occupied {
                    continue;
                }
            }
            parent[ni] = geom.index(cell);
            if !mask.is_blocked(next) {
                let mut route = vec![next];
                let mut cur = ni;
                while cur != s {
                    cur = parent[cur];
                    route.push(geom.cell_of_index(cur));
                }
                route.reverse();
                return Some(route);
            }
            queue.push_back(next);
        }
    }
    None
}
