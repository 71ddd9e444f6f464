//! Quintic time-polynomial fitted to the planner's via-points.
//!
//! Each via-point contributes a position row and a velocity row to a
//! `2n x 6` system that is solved in the least-squares sense. Long paths are
//! split into windows of at most [`TrajectoryConfig::window`] via-points that
//! share their junction via-point (and its velocity), each window getting
//! its own quintic on local time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Point, Pose};
use crate::linalg::{least_squares, LinalgError, Matrix};
use crate::scalar::{normalize_angle, Real};

pub const COEFFS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("time samples must be strictly increasing")]
    NonIncreasingTimes,
    #[error("trajectory system is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),
    #[error("no via-points to fit")]
    EmptyPath,
}

impl From<LinalgError> for TrajectoryError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::IllConditioned { condition } => TrajectoryError::IllConditioned(condition),
            other => TrajectoryError::DimensionMismatch(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct TrajectoryConfig<T: Real> {
    /// Seconds allotted per meter of straight-line distance to the goal.
    pub time_scale: T,
    pub t_f_min: T,
    /// Maximum via-points per fitted quintic.
    pub window: usize,
    /// Fit one quintic through all via-points regardless of path length.
    pub single_quintic: bool,
    /// Drive backwards along the trajectory (heading offset of pi).
    pub reverse: bool,
    pub eps_vel: T,
    pub max_condition: T,
}

impl<T: Real> Default for TrajectoryConfig<T> {
    fn default() -> Self {
        Self {
            time_scale: T::lit(2.0),
            t_f_min: T::one(),
            window: 12,
            single_quintic: false,
            reverse: false,
            eps_vel: T::lit(crate::kinematics::EPS_VEL),
            max_condition: T::lit(1e12),
        }
    }
}

/// Time budget and per-via-point time stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation<T> {
    pub t_f: T,
    pub dt: T,
    pub times: Vec<T>,
}

/// `t_f = max(T * range, t_f_min)` and `dt = t_f / n`. Via-point `i < n-1`
/// is stamped `i * dt`; the final via-point is stamped `t_f` so the
/// trajectory ends on the goal.
pub fn allocate_time<T: Real>(n: usize, robot: Point<T>, goal: Point<T>, time_scale: T, t_f_min: T) -> TimeAllocation<T> {
    assert!(n >= 1, "allocate_time needs at least one via-point");
    let t_f = (time_scale * robot.distance(&goal)).max(t_f_min);
    let dt = t_f / T::from_usize_lossy(n);
    let mut times: Vec<T> = (0..n).map(|i| T::from_usize_lossy(i) * dt).collect();
    if n > 1 {
        times[n - 1] = t_f;
    }
    TimeAllocation { t_f, dt, times }
}

/// Via-point velocities: central differences in the interior, zero at both
/// ends (rest to rest).
pub fn via_velocities<T: Real>(points: &[Point<T>], times: &[T]) -> (Vec<T>, Vec<T>) {
    let n = points.len();
    let mut vx = vec![T::zero(); n];
    let mut vy = vec![T::zero(); n];
    for i in 1..n.saturating_sub(1) {
        let span = times[i + 1] - times[i - 1];
        vx[i] = (points[i + 1].x - points[i - 1].x) / span;
        vy[i] = (points[i + 1].y - points[i - 1].y) / span;
    }
    (vx, vy)
}

/// Interleaved position/velocity system for one quintic.
#[derive(Debug, Clone)]
pub struct QuinticSystem<T> {
    pub a: Matrix<T>,
    pub bx: Vec<T>,
    pub by: Vec<T>,
}

pub fn position_row<T: Real>(t: T) -> [T; COEFFS] {
    let mut row = [T::one(); COEFFS];
    for k in 1..COEFFS {
        row[k] = row[k - 1] * t;
    }
    row
}

pub fn velocity_row<T: Real>(t: T) -> [T; COEFFS] {
    let pos = position_row(t);
    let mut row = [T::zero(); COEFFS];
    for k in 1..COEFFS {
        row[k] = T::from_usize_lossy(k) * pos[k - 1];
    }
    row
}

pub fn build_system<T: Real>(
    times: &[T],
    points: &[Point<T>],
    vx: &[T],
    vy: &[T],
) -> Result<QuinticSystem<T>, TrajectoryError> {
    let n = times.len();
    if points.len() != n || vx.len() != n || vy.len() != n {
        return Err(TrajectoryError::DimensionMismatch(format!(
            "{} times, {} points, {}/{} velocities",
            n,
            points.len(),
            vx.len(),
            vy.len()
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TrajectoryError::NonIncreasingTimes);
    }
    let mut a = Matrix::zeros(2 * n, COEFFS);
    let mut bx = Vec::with_capacity(2 * n);
    let mut by = Vec::with_capacity(2 * n);
    for i in 0..n {
        for (k, (p, v)) in position_row(times[i]).iter().zip(velocity_row(times[i])).enumerate() {
            a.set(2 * i, k, *p);
            a.set(2 * i + 1, k, v);
        }
        bx.extend([points[i].x, vx[i]]);
        by.extend([points[i].y, vy[i]]);
    }
    Ok(QuinticSystem { a, bx, by })
}

/// Least-squares coefficients `(a_x, a_y)`.
pub fn fit_quintic<T: Real>(sys: &QuinticSystem<T>, max_condition: T) -> Result<([T; COEFFS], [T; COEFFS]), TrajectoryError> {
    let ls = least_squares(&sys.a, &[&sys.bx, &sys.by], max_condition)?;
    let to_arr = |v: &Vec<T>| {
        let mut out = [T::zero(); COEFFS];
        out.copy_from_slice(v);
        out
    };
    Ok((to_arr(&ls.solutions[0]), to_arr(&ls.solutions[1])))
}

/// One quintic valid on `[t_start, t_end]`, in local time `t - t_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QuinticSegment<T: Real> {
    pub t_start: T,
    pub t_end: T,
    pub ax: [T; COEFFS],
    pub ay: [T; COEFFS],
}

/// Value, first and second derivative by Horner's rule.
pub fn eval_poly<T: Real>(c: &[T; COEFFS], t: T) -> (T, T, T) {
    let mut p = c[COEFFS - 1];
    let mut d = T::zero();
    let mut dd = T::zero();
    for k in (0..COEFFS - 1).rev() {
        dd = dd * t + d + d;
        d = d * t + p;
        p = p * t + c[k];
    }
    (p, d, dd)
}

/// Straightforward monomial sum, used to cross-check [`eval_poly`].
pub fn eval_poly_naive<T: Real>(c: &[T; COEFFS], t: T) -> T {
    c.iter().zip(position_row(t)).fold(T::zero(), |acc, (a, b)| acc + *a * b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QuinticTrajectory<T: Real> {
    pub segments: Vec<QuinticSegment<T>>,
    pub t_f: T,
    pub time_scale: T,
    pub via_count: usize,
    pub reverse: bool,
    pub eps_vel: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrajectorySample<T: Real> {
    pub reference: Pose<T>,
    pub vel: Point<T>,
    pub acc: Point<T>,
}

impl<T: Real> QuinticTrajectory<T> {
    fn segment_at(&self, t: T) -> &QuinticSegment<T> {
        self.segments
            .iter()
            .find(|s| t <= s.t_end)
            .unwrap_or_else(|| self.segments.last().expect("trajectory has segments"))
    }

    /// Position, velocity and acceleration at `t` clamped to `[0, t_f]`.
    pub fn eval(&self, t: T) -> (Point<T>, Point<T>, Point<T>) {
        let t = t.max(T::zero()).min(self.t_f);
        let seg = self.segment_at(t);
        let tau = t - seg.t_start;
        let (x, xd, xdd) = eval_poly(&seg.ax, tau);
        let (y, yd, ydd) = eval_poly(&seg.ay, tau);
        (Point::new(x, y), Point::new(xd, yd), Point::new(xdd, ydd))
    }

    pub fn position(&self, t: T) -> Point<T> {
        self.eval(t).0
    }

    /// Reference pose and derivatives at `t`.
    ///
    /// Heading is `atan2(ydot, xdot)` (plus pi when reversing). Where the
    /// reference speed drops under `eps_vel` the heading is taken from the
    /// chord of a symmetric time window instead.
    pub fn sample(&self, t: T) -> TrajectorySample<T> {
        let t = t.max(T::zero()).min(self.t_f);
        let (pos, vel, acc) = self.eval(t);
        let speed = vel.x.hypot(vel.y);
        let mut heading = if speed >= self.eps_vel {
            vel.y.atan2(vel.x)
        } else {
            self.chord_heading(t)
        };
        if self.reverse {
            heading += T::PI();
        }
        TrajectorySample {
            reference: Pose::new(pos.x, pos.y, normalize_angle(heading)),
            vel,
            acc,
        }
    }

    fn chord_heading(&self, t: T) -> T {
        let mut h = self.t_f * T::lit(0.01);
        for _ in 0..8 {
            let a = self.position((t - h).max(T::zero()));
            let b = self.position((t + h).min(self.t_f));
            if a.distance(&b) > T::lit(1e-9) {
                return (b.y - a.y).atan2(b.x - a.x);
            }
            h = h + h;
        }
        T::zero()
    }

    pub fn start(&self) -> Point<T> {
        self.position(T::zero())
    }

    pub fn end(&self) -> Point<T> {
        self.position(self.t_f)
    }
}

/// Fits a trajectory from `robot` through `points` (whose last entry is the
/// goal). Fewer than three via-points are padded by linear interpolation so
/// that every quintic sees at least six constraints.
pub fn fit_trajectory<T: Real>(
    points: &[Point<T>],
    robot: Point<T>,
    cfg: &TrajectoryConfig<T>,
) -> Result<(QuinticTrajectory<T>, TimeAllocation<T>), TrajectoryError> {
    let goal = *points.last().ok_or(TrajectoryError::EmptyPath)?;
    let pts: Vec<Point<T>> = match points.len() {
        1 => vec![points[0]; 3],
        2 => {
            let mid = Point::new((points[0].x + points[1].x) / T::lit(2.0), (points[0].y + points[1].y) / T::lit(2.0));
            vec![points[0], mid, points[1]]
        }
        _ => points.to_vec(),
    };
    let n = pts.len();
    let alloc = allocate_time(n, robot, goal, cfg.time_scale, cfg.t_f_min);
    let (vx, vy) = via_velocities(&pts, &alloc.times);

    let window = cfg.window.max(3);
    let bounds: Vec<usize> = if cfg.single_quintic || n <= window {
        vec![0, n - 1]
    } else {
        let pieces = (n - 1).div_ceil(window - 1);
        (0..=pieces).map(|k| (k * (n - 1) + pieces / 2) / pieces).collect()
    };

    let mut segments = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let t0 = alloc.times[lo];
        let local: Vec<T> = alloc.times[lo..=hi].iter().map(|t| *t - t0).collect();
        let sys = build_system(&local, &pts[lo..=hi], &vx[lo..=hi], &vy[lo..=hi])?;
        let (ax, ay) = fit_quintic(&sys, cfg.max_condition)?;
        segments.push(QuinticSegment {
            t_start: t0,
            t_end: alloc.times[hi],
            ax,
            ay,
        });
    }
    Ok((
        QuinticTrajectory {
            segments,
            t_f: alloc.t_f,
            time_scale: cfg.time_scale,
            via_count: n,
            reverse: cfg.reverse,
            eps_vel: cfg.eps_vel,
        },
        alloc,
    ))
}

/// Largest distance between a via-point and the trajectory at its stamp.
pub fn max_fit_residual<T: Real>(traj: &QuinticTrajectory<T>, points: &[Point<T>], times: &[T]) -> T {
    points
        .iter()
        .zip(times)
        .map(|(p, t)| traj.position(*t).distance(p))
        .fold(T::zero(), T::max)
}
