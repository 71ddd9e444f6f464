//! Deterministic closed-loop simulation.
//!
//! The true world (static map plus dynamic discs) is kept apart from the
//! robot's belief grid; obstacles reach the belief only through scans.
//! Per tick: operator commands, obstacle motion, overlay rasterization,
//! raycast, belief update, navigator step, plant integration, record.

pub mod command;
pub mod scenario;
mod trace;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::kinematics::{integrate_unicycle, Point, Pose, VelocityCommand};
use crate::navigator::{FailReason, Mode, NavEvent, Navigator, StepDiagnostics, Strategy};
use crate::scalar::Real;
use crate::world::{raycast_scan, update_from_scan, Cell, CellState, OccupancyGrid, RangeScan};

pub use command::{CommandError, LoggedCommand, OperatorCommand};
pub use scenario::{DynamicObstacle, MapSource, Motion, Scenario, ScenarioError, SimConfig, Waypoint};
pub use trace::{CommittedPlan, Metrics, Outcome, SimTrace, TickRecord, TRACE_HEADER};

/// How far around the robot the clearance check looks for static cells.
const CLEARANCE_WINDOW: f64 = 1.5;

pub struct Simulation<T: Real> {
    scenario: Scenario<T>,
    world: OccupancyGrid<T>,
    belief: OccupancyGrid<T>,
    pose: Pose<T>,
    nav: Navigator<T>,
    obstacles: Vec<DynamicObstacle<T>>,
    tick: u64,
    rng: ChaCha8Rng,
    replay: VecDeque<LoggedCommand<T>>,
    trace: SimTrace<T>,
    last_scan: Option<RangeScan<T>>,
    last_diagnostics: Option<StepDiagnostics<T>>,
    /// First tick of the current terminal streak.
    ended_at: Option<u64>,
}

impl<T: Real> Simulation<T> {
    /// Builds the world and commits the initial plan. A failed initial plan
    /// is not an error: the run simply ends FAILED on its first tick.
    pub fn new(scenario: Scenario<T>) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let world = scenario.grid()?;
        let belief = world.clone();
        let mut nav = Navigator::new(scenario.nav, scenario.goal);
        if scenario.nav.strategy != Strategy::VfhOnly {
            let _ = nav.plan_and_commit(&belief, &scenario.robot_start);
        }
        let mut sim = Self {
            world,
            belief,
            pose: scenario.robot_start,
            nav,
            obstacles: scenario.obstacles.clone(),
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(scenario.sim.seed),
            replay: scenario.sim.commands.iter().cloned().collect(),
            trace: SimTrace::default(),
            last_scan: None,
            last_diagnostics: None,
            ended_at: None,
            scenario,
        };
        sim.record_plan();
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }

    pub fn world(&self) -> &OccupancyGrid<T> {
        &self.world
    }

    pub fn belief(&self) -> &OccupancyGrid<T> {
        &self.belief
    }

    pub fn pose(&self) -> Pose<T> {
        self.pose
    }

    pub fn navigator(&self) -> &Navigator<T> {
        &self.nav
    }

    pub fn obstacles(&self) -> &[DynamicObstacle<T>] {
        &self.obstacles
    }

    /// Index of the next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> T {
        T::from_usize_lossy(self.tick as usize) * self.scenario.sim.tick_dt
    }

    pub fn trace(&self) -> &SimTrace<T> {
        &self.trace
    }

    pub fn last_scan(&self) -> Option<&RangeScan<T>> {
        self.last_scan.as_ref()
    }

    pub fn last_diagnostics(&self) -> Option<&StepDiagnostics<T>> {
        self.last_diagnostics.as_ref()
    }

    /// Positions of the obstacles present at the current time.
    pub fn active_obstacles(&self) -> impl Iterator<Item = (&DynamicObstacle<T>, Point<T>)> + '_ {
        let t = self.time();
        self.obstacles
            .iter()
            .filter(move |o| o.is_active(t))
            .map(move |o| (o, o.position_at(t)))
    }

    /// True once the navigator reached a terminal mode and no replayed
    /// commands remain that could revive it.
    pub fn is_finished(&self) -> bool {
        self.nav.mode().is_terminal() && self.replay.is_empty() && !self.scenario.sim.hold
    }

    /// Applies an operator command before the next tick and logs it.
    pub fn apply_command(&mut self, command: OperatorCommand<T>) -> Result<(), CommandError> {
        command.check_bounds(&self.world)?;
        let now = self.time();
        match &command {
            OperatorCommand::AddObstacle { id, x, y, radius } => {
                if self.obstacles.iter().any(|o| &o.id == id) {
                    return Err(CommandError::DuplicateId(id.clone()));
                }
                self.obstacles.push(DynamicObstacle {
                    id: id.clone(),
                    radius: *radius,
                    appear_at: now,
                    motion: Motion::External { x: *x, y: *y },
                });
            }
            OperatorCommand::MoveObstacle { id, x, y } => {
                let o = self
                    .obstacles
                    .iter_mut()
                    .find(|o| &o.id == id)
                    .ok_or_else(|| CommandError::UnknownId(id.clone()))?;
                match &mut o.motion {
                    Motion::External { x: ox, y: oy } => {
                        *ox = *x;
                        *oy = *y;
                    }
                    Motion::Scripted { .. } => return Err(CommandError::NotExternal(id.clone())),
                }
            }
            OperatorCommand::RemoveObstacle { id } => {
                let i = self
                    .obstacles
                    .iter()
                    .position(|o| &o.id == id)
                    .ok_or_else(|| CommandError::UnknownId(id.clone()))?;
                self.obstacles.remove(i);
            }
            OperatorCommand::SetGoal { x, y, theta } => {
                self.nav
                    .set_goal(&self.belief, &self.pose, Pose::new(*x, *y, *theta))?;
                self.record_plan();
            }
        }
        self.trace.commands.push(LoggedCommand {
            tick: self.tick,
            command,
        });
        Ok(())
    }

    /// Runs one tick and returns its record.
    pub fn step(&mut self) -> &TickRecord<T> {
        while self.replay.front().is_some_and(|c| c.tick <= self.tick) {
            let logged = self.replay.pop_front().unwrap();
            let _ = self.apply_command(logged.command);
        }
        let dt = self.scenario.sim.tick_dt;
        let now = self.time();

        let mut overlay = self.world.clone();
        for o in self.obstacles.iter().filter(|o| o.is_active(now)) {
            overlay.fill_disc(o.position_at(now), o.radius, CellState::Occupied);
        }
        let clearance = self.clearance(now);

        let scan = match raycast_scan(&self.pose, &overlay, &self.scenario.scan) {
            Ok(scan) => {
                update_from_scan(&mut self.belief, &self.pose, &scan).expect("scan matches its spec");
                scan
            }
            // Sensor inside an obstacle: every beam reads blocked and the
            // belief is left alone.
            Err(_) => {
                let floor = self.world.resolution() * T::lit(1e-6);
                RangeScan {
                    spec: self.scenario.scan,
                    ranges: vec![floor; self.scenario.scan.beam_count],
                }
            }
        };

        let out = self.nav.step(&self.pose, &scan, &self.belief, dt);
        if out.events.iter().any(|e| matches!(e, NavEvent::Planned { .. })) {
            self.record_plan();
        }
        let applied = self.perturb(out.command);
        let next = integrate_unicycle(&self.pose, &applied, dt);

        let record = TickRecord {
            tick: self.tick,
            time: now,
            pose: self.pose,
            command: out.command,
            mode: out.mode,
            error: out.diagnostics.error,
            min_range: out.diagnostics.min_range,
            clearance,
            events: out.events.iter().map(|e| e.to_string()).collect(),
        };
        self.trace.metrics.absorb(&record, self.scenario.nav.robot_radius);
        self.trace.metrics.path_length += self.pose.position().distance(&next.position());
        if !record.mode.is_terminal() {
            self.ended_at = None;
        } else if self.ended_at.is_none() {
            self.ended_at = Some(record.tick);
        }
        self.trace.records.push(record);
        self.last_scan = Some(scan);
        self.last_diagnostics = Some(out.diagnostics);
        self.pose = next;
        self.tick += 1;
        self.finalize_metrics();
        self.trace.records.last().unwrap()
    }

    /// Steps until the run ends or `max_ticks` records exist. Tick 0 is
    /// always recorded, even when the outcome is already decided.
    pub fn run(mut self) -> SimTrace<T> {
        loop {
            self.step();
            if self.is_finished() || self.tick >= self.scenario.sim.max_ticks {
                break;
            }
        }
        self.finalize_metrics();
        self.trace
    }

    fn finalize_metrics(&mut self) {
        let dt = self.scenario.sim.tick_dt;
        let m = &mut self.trace.metrics;
        let last = self.trace.records.last().map_or(0, |r| r.tick);
        m.run_time = T::from_usize_lossy(self.ended_at.unwrap_or(last) as usize) * dt;
        m.ticks = self.trace.records.len() as u64;
        m.avoid_tick_fraction = if m.ticks == 0 {
            T::zero()
        } else {
            T::from_usize_lossy(m.avoiding_ticks as usize) / T::from_usize_lossy(m.ticks as usize)
        };
        m.final_goal_distance = self.pose.position().distance(&self.nav.state.goal.position());
        self.trace.outcome = match self.nav.mode() {
            Mode::Arrived => Outcome::Arrived,
            Mode::Failed => Outcome::Failed,
            _ => Outcome::Timeout,
        };
        self.trace.fail_reason = self.nav.state.fail_reason.clone().map(|r: FailReason| r.to_string());
    }

    fn record_plan(&mut self) {
        let s = &self.nav.state;
        if let (Some(plan), Some(traj)) = (&s.plan, &s.trajectory) {
            if self.trace.plans.last().is_some_and(|p| p.plan_id == s.plan_id) {
                return;
            }
            self.trace.plans.push(CommittedPlan {
                tick: self.tick,
                time: self.time(),
                plan_id: s.plan_id,
                escape_len: s.escape_len,
                plan: plan.clone(),
                trajectory: traj.clone(),
            });
        }
    }

    fn perturb(&mut self, cmd: VelocityCommand<T>) -> VelocityCommand<T> {
        let sim = &self.scenario.sim;
        let mut out = cmd;
        if sim.sigma_v > T::zero() {
            let n = Normal::new(0.0, sim.sigma_v.as_f64()).expect("finite sigma");
            out.v += T::lit(n.sample(&mut self.rng));
        }
        if sim.sigma_omega > T::zero() {
            let n = Normal::new(0.0, sim.sigma_omega.as_f64()).expect("finite sigma");
            out.omega += T::lit(n.sample(&mut self.rng));
        }
        out
    }

    /// Distance from the robot center to the nearest true obstacle surface
    /// (static cell boxes and active discs), capped at the search window.
    fn clearance(&self, now: T) -> T {
        let mut best = static_clearance(&self.world, self.pose.position(), T::lit(CLEARANCE_WINDOW));
        for o in self.obstacles.iter().filter(|o| o.is_active(now)) {
            best = best.min(o.position_at(now).distance(&self.pose.position()) - o.radius);
        }
        best
    }
}

/// Distance from `p` to the nearest OCCUPIED cell box within `window`;
/// returns `window` when there is none. Points inside a box give 0.
pub fn static_clearance<T: Real>(grid: &OccupancyGrid<T>, p: Point<T>, window: T) -> T {
    let g = grid.geometry();
    let half = g.resolution / T::lit(2.0);
    let (c0, r0) = g.world_to_cell_unchecked(Point::new(p.x - window, p.y - window));
    let (c1, r1) = g.world_to_cell_unchecked(Point::new(p.x + window, p.y + window));
    let mut best = window;
    for r in r0.max(0)..=r1.min(g.height as i64 - 1) {
        for c in c0.max(0)..=c1.min(g.width as i64 - 1) {
            let cell = Cell::new(c as usize, r as usize);
            if !grid.is_occupied(cell) {
                continue;
            }
            let center = g.cell_center(cell);
            let dx = ((p.x - center.x).abs() - half).max(T::zero());
            let dy = ((p.y - center.y).abs() - half).max(T::zero());
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Loads nothing from disk: runs an already-parsed scenario to completion.
pub fn run<T: Real>(scenario: Scenario<T>) -> Result<SimTrace<T>, ScenarioError> {
    Ok(Simulation::new(scenario)?.run())
}
