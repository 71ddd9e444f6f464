//! Simulated range scanning and the inverse-sensor log-odds update.

use serde::{Deserialize, Serialize};

use super::{Cell, GridGeometry, OccupancyGrid, WorldError};
use crate::kinematics::{Point, Pose};
use crate::scalar::Real;

/// Planar range-finder description. Beam `i` points at
/// `-fov/2 + i * fov/beam_count` relative to the robot heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct ScanSpec<T: Real> {
    pub fov: T,
    pub beam_count: usize,
    pub max_range: T,
}

impl<T: Real> Default for ScanSpec<T> {
    fn default() -> Self {
        Self {
            fov: T::lit(270f64.to_radians()),
            beam_count: 1080,
            max_range: T::lit(5.0),
        }
    }
}

impl<T: Real> ScanSpec<T> {
    pub fn validate(&self) -> Result<(), WorldError> {
        if self.beam_count == 0 {
            return Err(WorldError::InvalidScanSpec("beam_count must be >= 1"));
        }
        if !(self.fov > T::zero() && self.fov <= T::PI() + T::PI() + T::lit(1e-12)) {
            return Err(WorldError::InvalidScanSpec("fov must lie in (0, 2pi]"));
        }
        if !(self.max_range > T::zero()) {
            return Err(WorldError::InvalidScanSpec("max_range must be positive"));
        }
        Ok(())
    }

    pub fn angular_step(&self) -> T {
        self.fov / T::from_usize_lossy(self.beam_count)
    }

    /// Beam angle in the robot frame.
    pub fn beam_angle(&self, i: usize) -> T {
        -self.fov / T::lit(2.0) + T::from_usize_lossy(i) * self.angular_step()
    }

    /// Whether the beams close a full circle.
    pub fn is_full_circle(&self) -> bool {
        (self.fov - T::TAU()).abs() < T::lit(1e-9)
    }
}

/// One sweep of ranges in the robot frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RangeScan<T: Real> {
    pub spec: ScanSpec<T>,
    pub ranges: Vec<T>,
}

impl<T: Real> RangeScan<T> {
    /// A scan that saw nothing.
    pub fn empty(spec: ScanSpec<T>) -> Self {
        Self {
            spec,
            ranges: vec![spec.max_range; spec.beam_count],
        }
    }

    pub fn min_range(&self) -> T {
        self.ranges.iter().copied().fold(self.spec.max_range, T::min)
    }

    /// `(angle, range)` pairs in the robot frame.
    pub fn beams(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.ranges
            .iter()
            .enumerate()
            .map(|(i, r)| (self.spec.beam_angle(i), *r))
    }
}

/// Amanatides-Woo cell walk. Calls `visit(cell, entry_distance)` for every
/// cell the ray passes through, starting with the cell containing `start`
/// (entry distance 0), until `visit` returns `false`, the ray leaves the
/// grid, or the entry distance exceeds `max_dist`.
pub(crate) fn walk_ray<T: Real, F>(
    geom: &GridGeometry<T>,
    start: Point<T>,
    angle: T,
    max_dist: T,
    mut visit: F,
) where
    F: FnMut(Cell, T) -> bool,
{
    let (mut col, mut row) = geom.world_to_cell_unchecked(start);
    if !geom.contains_cell(col, row) {
        return;
    }
    let (dy, dx) = angle.sin_cos();
    let res = geom.resolution;
    let gx = (start.x - geom.origin.x) / res;
    let gy = (start.y - geom.origin.y) / res;

    let axis = |d: T, g: T, cell: i64| -> (i64, T, T) {
        if d > T::zero() {
            let next = T::from_i64(cell + 1).unwrap();
            (1, (next - g) * res / d, res / d)
        } else if d < T::zero() {
            let next = T::from_i64(cell).unwrap();
            (-1, (g - next) * res / -d, res / -d)
        } else {
            (0, T::infinity(), T::infinity())
        }
    };
    let (step_x, mut t_max_x, t_delta_x) = axis(dx, gx, col);
    let (step_y, mut t_max_y, t_delta_y) = axis(dy, gy, row);

    let mut t_entry = T::zero();
    loop {
        if t_entry > max_dist {
            return;
        }
        if !visit(Cell::new(col as usize, row as usize), t_entry) {
            return;
        }
        if t_max_x < t_max_y {
            col += step_x;
            t_entry = t_max_x;
            t_max_x += t_delta_x;
        } else {
            row += step_y;
            t_entry = t_max_y;
            t_max_y += t_delta_y;
        }
        if !geom.contains_cell(col, row) {
            return;
        }
    }
}

/// Smallest range reported for a beam that starts on an obstacle boundary.
fn min_reported_range<T: Real>(res: T) -> T {
    res * T::lit(1e-6)
}

/// Casts every beam of `spec` from `pose` against the OCCUPIED cells of
/// `grid`. UNKNOWN cells do not stop a beam.
pub fn raycast_scan<T: Real>(
    pose: &Pose<T>,
    grid: &OccupancyGrid<T>,
    spec: &ScanSpec<T>,
) -> Result<RangeScan<T>, WorldError> {
    spec.validate()?;
    let start_cell = grid.world_to_cell(pose.position())?;
    if grid.is_occupied(start_cell) {
        return Err(WorldError::PoseInObstacle);
    }
    let geom = grid.geometry();
    let floor = min_reported_range(geom.resolution);
    let ranges = (0..spec.beam_count)
        .map(|i| {
            let mut hit = spec.max_range;
            walk_ray(geom, pose.position(), pose.theta + spec.beam_angle(i), spec.max_range, |cell, t| {
                if grid.is_occupied(cell) {
                    hit = t.max(floor).min(spec.max_range);
                    false
                } else {
                    true
                }
            });
            hit
        })
        .collect();
    Ok(RangeScan { spec: *spec, ranges })
}

/// Folds a scan taken at `pose` into the grid's log-odds belief.
///
/// Each cell receives at most one update per scan: cells crossed by a beam
/// before its end point get `l_miss`, the cell where a beam terminated short
/// of `max_range` gets `l_hit`. A hit from any beam takes precedence over
/// misses from others. Beam segments outside the grid are ignored.
pub fn update_from_scan<T: Real>(
    grid: &mut OccupancyGrid<T>,
    pose: &Pose<T>,
    scan: &RangeScan<T>,
) -> Result<(), WorldError> {
    let spec = scan.spec;
    if scan.ranges.len() != spec.beam_count {
        return Err(WorldError::ScanMismatch {
            got: scan.ranges.len(),
            expected: spec.beam_count,
        });
    }
    const MISS: u8 = 1;
    const HIT: u8 = 2;
    let geom = *grid.geometry();
    let tol = geom.resolution * T::lit(1e-6);
    let mut marks = vec![0u8; geom.len()];
    let mut touched = Vec::new();

    for (angle, range) in scan.beams() {
        let is_hit = range < spec.max_range;
        let mut prev: Option<usize> = None;
        walk_ray(&geom, pose.position(), pose.theta + angle, spec.max_range, |cell, t| {
            let idx = geom.index(cell);
            if t < range - tol {
                if marks[idx] == 0 {
                    touched.push(idx);
                    marks[idx] = MISS;
                }
                prev = Some(idx);
                true
            } else {
                if is_hit {
                    // a range ending on a cell boundary hits the cell being
                    // entered; otherwise the end point lies in the last cell
                    let hit = match prev {
                        Some(p) if t > range + tol => p,
                        _ => idx,
                    };
                    if marks[hit] == 0 {
                        touched.push(hit);
                    }
                    marks[hit] = HIT;
                }
                false
            }
        });
    }

    let params = *grid.params();
    touched.sort_unstable();
    for idx in touched {
        let delta = if marks[idx] == HIT {
            params.l_hit
        } else {
            params.l_miss
        };
        grid.apply_log_odds(idx, delta);
    }
    Ok(())
}
