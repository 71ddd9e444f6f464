//! A* over the inflated occupancy grid.
//!
//! Moves are 8-connected; a diagonal move is only allowed when both
//! orthogonal cells it passes between are free, so paths never clip a
//! blocked corner. Costs are kept exactly as `straight + diagonal * sqrt(2)`
//! with integer counts, which makes cost comparison (and therefore the
//! optimality check against other search orders) free of rounding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Point;
use crate::scalar::Real;
use crate::world::{Cell, PlanningMask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("start lies outside the map or in a blocked cell")]
    StartBlocked,
    #[error("goal lies outside the map or in a blocked cell")]
    GoalBlocked,
    #[error("goal is unreachable from start")]
    NoPath,
}

/// Path cost in cells: `straight + diagonal * sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub const ZERO: Self = Self {
        straight: 0,
        diagonal: 0,
    };
    pub const STRAIGHT: Self = Self {
        straight: 1,
        diagonal: 0,
    };
    pub const DIAGONAL: Self = Self {
        straight: 0,
        diagonal: 1,
    };

    pub fn new(straight: u32, diagonal: u32) -> Self {
        Self { straight, diagonal }
    }

    /// Admissible and consistent 8-connected distance between two cells.
    pub fn heuristic(a: Cell, b: Cell) -> Self {
        let dx = a.col.abs_diff(b.col) as u32;
        let dy = a.row.abs_diff(b.row) as u32;
        Self::new(dx.max(dy) - dx.min(dy), dx.min(dy))
    }

    pub fn value<T: Real>(&self) -> T {
        T::from_u32(self.straight).unwrap() + T::from_u32(self.diagonal).unwrap() * T::SQRT_2()
    }

    pub fn meters<T: Real>(&self, resolution: T) -> T {
        self.value::<T>() * resolution
    }
}

impl std::ops::Add for OctileCost {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.straight + rhs.straight, self.diagonal + rhs.diagonal)
    }
}

impl Ord for OctileCost {
    /// Exact comparison of `a1 + b1 sqrt2` against `a2 + b2 sqrt2`.
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.straight as i64 - other.straight as i64;
        let db = self.diagonal as i64 - other.diagonal as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            // opposite signs: compare da^2 with 2 db^2 (never equal, sqrt2 is irrational)
            (1, _) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Via-points produced by the global planner, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PathPlan<T: Real> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub cells: Vec<Cell>,
    pub cost: OctileCost,
}

impl<T: Real> PathPlan<T> {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn point(&self, i: usize) -> Point<T> {
        Point::new(self.xs[i], self.ys[i])
    }

    pub fn points(&self) -> impl Iterator<Item = Point<T>> + '_ {
        self.xs.iter().zip(&self.ys).map(|(x, y)| Point::new(*x, *y))
    }

    pub fn last(&self) -> Option<Point<T>> {
        (!self.is_empty()).then(|| self.point(self.len() - 1))
    }
}

/// Sum of consecutive segment lengths.
pub fn path_length<T: Real>(plan: &PathPlan<T>) -> T {
    let pts: Vec<_> = plan.points().collect();
    pts.windows(2)
        .fold(T::zero(), |acc, w| acc + w[0].distance(&w[1]))
}

const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Free neighbors of `cell` together with the cost of stepping there.
pub fn successors<T: Real>(mask: &PlanningMask<T>, cell: Cell) -> impl Iterator<Item = (Cell, OctileCost)> + '_ {
    let geom = *mask.geometry();
    let free = move |c: i64, r: i64| geom.contains_cell(c, r) && !mask.is_blocked(Cell::new(c as usize, r as usize));
    NEIGHBORS.iter().filter_map(move |&(dc, dr)| {
        let c = cell.col as i64 + dc;
        let r = cell.row as i64 + dr;
        if !free(c, r) {
            return None;
        }
        if dc != 0 && dr != 0 {
            if !free(cell.col as i64 + dc, cell.row as i64) || !free(cell.col as i64, cell.row as i64 + dr) {
                return None;
            }
            Some((Cell::new(c as usize, r as usize), OctileCost::DIAGONAL))
        } else {
            Some((Cell::new(c as usize, r as usize), OctileCost::STRAIGHT))
        }
    })
}

#[derive(PartialEq, Eq)]
struct OpenEntry {
    f: OctileCost,
    g: OctileCost,
    index: usize,
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: smallest f first, then largest g, then
    // smallest cell index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then_with(|| self.g.cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost 8-connected path between the cells containing `start` and
/// `goal`. Via-points are cell centers.
pub fn plan_astar<T: Real>(mask: &PlanningMask<T>, start: Point<T>, goal: Point<T>) -> Result<PathPlan<T>, PlanError> {
    let geom = *mask.geometry();
    let start = geom.world_to_cell(start).map_err(|_| PlanError::StartBlocked)?;
    let goal = geom.world_to_cell(goal).map_err(|_| PlanError::GoalBlocked)?;
    if mask.is_blocked(start) {
        return Err(PlanError::StartBlocked);
    }
    if mask.is_blocked(goal) {
        return Err(PlanError::GoalBlocked);
    }
    plan_cells(mask, start, goal)
}

/// As [`plan_astar`] but on cell indices, with the caller responsible for
/// checking the endpoints.
pub fn plan_cells<T: Real>(mask: &PlanningMask<T>, start: Cell, goal: Cell) -> Result<PathPlan<T>, PlanError> {
    let geom = *mask.geometry();
    let n = geom.len();
    let mut g_score: Vec<Option<OctileCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let s = geom.index(start);
    let goal_idx = geom.index(goal);
    g_score[s] = Some(OctileCost::ZERO);
    open.push(OpenEntry {
        f: OctileCost::heuristic(start, goal),
        g: OctileCost::ZERO,
        index: s,
    });

    while let Some(OpenEntry { g, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal_idx {
            return Ok(reconstruct(mask, &parent, index, g));
        }
        let cell = geom.cell_of_index(index);
        for (next, step) in successors(mask, cell) {
            let ni = geom.index(next);
            if closed[ni] {
                continue;
            }
            let tentative = g + step;
            if g_score[ni].map_or(true, |old| tentative < old) {
                g_score[ni] = Some(tentative);
                parent[ni] = index;
                open.push(OpenEntry {
                    f: tentative + OctileCost::heuristic(next, goal),
                    g: tentative,
                    index: ni,
                });
            }
        }
    }
    Err(PlanError::NoPath)
}

fn reconstruct<T: Real>(mask: &PlanningMask<T>, parent: &[usize], goal: usize, cost: OctileCost) -> PathPlan<T> {
    let geom = mask.geometry();
    let mut cells = vec![geom.cell_of_index(goal)];
    let mut cur = goal;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        cells.push(geom.cell_of_index(cur));
    }
    cells.reverse();
    let (xs, ys) = cells.iter().map(|c| {
        let p = geom.cell_center(*c);
        (p.x, p.y)
    }).unzip();
    PathPlan { xs, ys, cells, cost }
}
