use serde::{Deserialize, Serialize};

use super::{Cell, CellState, GridGeometry, OccupancyGrid};
use crate::kinematics::Point;
use crate::scalar::Real;

/// Binary traversability raster used by the global planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlanningMask<T: Real> {
    geometry: GridGeometry<T>,
    blocked: Vec<bool>,
}

impl<T: Real> PlanningMask<T> {
    pub fn from_blocked(geometry: GridGeometry<T>, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), geometry.len());
        Self { geometry, blocked }
    }

    pub fn geometry(&self) -> &GridGeometry<T> {
        &self.geometry
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.geometry.index(cell)]
    }

    pub fn is_blocked_at(&self, p: Point<T>) -> bool {
        self.geometry
            .world_to_cell(p)
            .map(|c| self.is_blocked(c))
            .unwrap_or(true)
    }

    pub fn blocked(&self) -> &[bool] {
        &self.blocked
    }

    pub fn set_blocked(&mut self, cell: Cell, blocked: bool) {
        let i = self.geometry.index(cell);
        self.blocked[i] = blocked;
    }
}

/// Grows OCCUPIED cells by `radius` meters (center-to-center distance).
///
/// UNKNOWN cells are blocked themselves but are not grown.
pub fn inflate<T: Real>(grid: &OccupancyGrid<T>, radius: T) -> PlanningMask<T> {
    let geom = *grid.geometry();
    let reach = (radius / geom.resolution).max(T::zero());
    let reach_sq = reach * reach + T::lit(1e-9);
    let span = reach.floor().to_i64().unwrap_or(0);

    let mut offsets = Vec::new();
    for dr in -span..=span {
        for dc in -span..=span {
            if T::from_i64(dr * dr + dc * dc).unwrap() <= reach_sq {
                offsets.push((dc, dr));
            }
        }
    }

    let mut blocked = vec![false; geom.len()];
    for (idx, state) in grid.states().iter().enumerate() {
        match state {
            CellState::Free => {}
            CellState::Unknown => blocked[idx] = true,
            CellState::Occupied => {
                let cell = geom.cell_of_index(idx);
                for &(dc, dr) in &offsets {
                    let c = cell.col as i64 + dc;
                    let r = cell.row as i64 + dr;
                    if geom.contains_cell(c, r) {
                        blocked[geom.index(Cell::new(c as usize, r as usize))] = true;
                    }
                }
            }
        }
    }
    PlanningMask::from_blocked(geom, blocked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize) -> OccupancyGrid<f64> {
        OccupancyGrid::new_free(GridGeometry::new(w, h, 0.1, Point::new(0.0, 0.0)))
    }

    #[test]
    fn zero_radius_is_identity() {
        let mut g = grid(8, 8);
        g.set_state(Cell::new(2, 3), CellState::Occupied);
        g.set_state(Cell::new(7, 0), CellState::Occupied);
        let m = inflate(&g, 0.0);
        for idx in 0..64 {
            let c = g.geometry().cell_of_index(idx);
            assert_eq!(m.is_blocked(c), g.is_occupied(c));
        }
    }

    #[test]
    fn small_disc_blocks_eight_neighborhood() {
        let mut g = grid(9, 9);
        g.set_state(Cell::new(4, 4), CellState::Occupied);
        let m = inflate(&g, 0.15);
        let count = m.blocked().iter().filter(|b| **b).count();
        assert_eq!(count, 9);
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                assert!(m.is_blocked(Cell::new((4 + dc) as usize, (4 + dr) as usize)));
            }
        }
    }

    #[test]
    fn unknown_blocked_but_not_grown() {
        let mut g = grid(5, 5);
        g.set_state(Cell::new(2, 2), CellState::Unknown);
        let m = inflate(&g, 0.3);
        assert_eq!(m.blocked().iter().filter(|b| **b).count(), 1);
    }
}
