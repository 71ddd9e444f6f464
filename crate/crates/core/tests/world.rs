use hybridnav_core::kinematics::{Point, Pose};
use hybridnav_core::world::{inflate, parse_map, format_map, raycast_scan, update_from_scan, Cell, CellState, GridGeometry, OccupancyGrid, RangeScan, ScanSpec, WorldError};
use hybridnav_oracles::{brute_inflate, march_ray, SplitMix};
use proptest::prelude::*;

fn random_grid(rng: &mut SplitMix, w: usize, h: usize, res: f64, density: f64) -> (OccupancyGrid<f64>, Vec<bool>) {
    let mut grid = OccupancyGrid::<f64>::new_free(GridGeometry::new(w, h, res, Point::new(0.0, 0.0)));
    let mut occ = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if rng.unit() < density {
                grid.set_state(Cell::new(c, r), CellState::Occupied);
                occ[r * w + c] = true;
            }
        }
    }
    (grid, occ)
}

#[test]
fn raycast_agrees_with_ray_marching() {
    let mut rng = SplitMix::new(11);
    let step = 1e-5;
    let (w, h, res) = (40, 30, 0.1);
    let mut beams_checked = 0;
    for _ in 0..40 {
        let (grid, occ) = random_grid(&mut rng, w, h, res, 0.08);
        let pose = loop {
            let p = Pose::new(rng.range(0.0, w as f64 * res), rng.range(0.0, h as f64 * res), rng.range(-3.0, 3.0));
            let c = grid.world_to_cell(p.position()).unwrap();
            if !grid.is_occupied(c) {
                break p;
            }
        };
        let spec = ScanSpec { fov: 270f64.to_radians(), beam_count: 90, max_range: 2.5 };
        let scan = raycast_scan(&pose, &grid, &spec).unwrap();
        for (i, r) in scan.ranges.iter().enumerate() {
            let angle = pose.theta + spec.beam_angle(i);
            let oracle = march_ray(w, h, res, &occ, (pose.x, pose.y), angle, spec.max_range, step);
            // marching lands inside the hit cell, at most one step past its boundary
            assert!(*r <= oracle + 1e-9 && oracle - r < step + 1e-9, "beam {i}: walk {r} march {oracle}");
            beams_checked += 1;
        }
    }
    assert_eq!(beams_checked, 40 * 90);
}

#[test]
fn quarter_turn_of_world_and_pose_leaves_ranges_unchanged() {
    let mut rng = SplitMix::new(13);
    let (n, res) = (30, 0.1);
    let side = n as f64 * res;
    for _ in 0..20 {
        let (grid, occ) = random_grid(&mut rng, n, n, res, 0.06);
        // rotate 90 degrees counter-clockwise about the grid center
        let mut turned = OccupancyGrid::<f64>::new_free(*grid.geometry());
        for r in 0..n {
            for c in 0..n {
                if occ[r * n + c] {
                    turned.set_state(Cell::new(n - 1 - r, c), CellState::Occupied);
                }
            }
        }
        let pose = loop {
            let p = Pose::new(rng.range(0.0, side), rng.range(0.0, side), rng.range(-3.0, 3.0));
            if !grid.is_occupied(grid.world_to_cell(p.position()).unwrap()) {
                break p;
            }
        };
        let spec = ScanSpec { fov: std::f64::consts::TAU, beam_count: 64, max_range: 2.0 };
        let a = raycast_scan(&pose, &grid, &spec).unwrap();
        let moved = Pose::new(side - pose.y, pose.x, pose.theta + std::f64::consts::FRAC_PI_2);
        let b = raycast_scan(&moved, &turned, &spec).unwrap();
        for (ra, rb) in a.ranges.iter().zip(&b.ranges) {
            assert!((ra - rb).abs() < 1e-9, "{ra} vs {rb}");
        }
    }
}

#[test]
fn mapped_scan_reproduces_itself() {
    let mut rng = SplitMix::new(14);
    let (n, res) = (40, 0.1);
    let diag = res * std::f64::consts::SQRT_2;
    for _ in 0..10 {
        let (world, _) = random_grid(&mut rng, n, n, res, 0.03);
        let pose = loop {
            let p = Pose::new(rng.range(0.5, 3.5), rng.range(0.5, 3.5), rng.range(-3.0, 3.0));
            if !world.is_occupied(world.world_to_cell(p.position()).unwrap()) {
                break p;
            }
        };
        let spec = ScanSpec { fov: 270f64.to_radians(), beam_count: 270, max_range: 3.0 };
        let scan = raycast_scan(&pose, &world, &spec).unwrap();
        let mut belief = OccupancyGrid::<f64>::new_unknown(*world.geometry());
        for _ in 0..10 {
            update_from_scan(&mut belief, &pose, &scan).unwrap();
        }
        let again = raycast_scan(&pose, &belief, &spec).unwrap();
        for (a, b) in scan.ranges.iter().zip(&again.ranges) {
            assert!((a - b).abs() <= diag, "{a} vs {b}");
        }
    }
}

#[test]
fn raycast_rejects_pose_inside_obstacle() {
    let mut grid = OccupancyGrid::<f64>::new_free(GridGeometry::new(10, 10, 0.1, Point::new(0.0, 0.0)));
    grid.set_state(Cell::new(5, 5), CellState::Occupied);
    let r = raycast_scan(&Pose::new(0.55, 0.55, 0.0), &grid, &ScanSpec::default());
    assert!(matches!(r, Err(WorldError::PoseInObstacle)));
}

#[test]
fn inflation_matches_pairwise_distance_oracle() {
    let mut rng = SplitMix::new(5);
    for _ in 0..60 {
        let (w, h) = (15 + rng.below(10), 15 + rng.below(10));
        let (mut grid, occ) = random_grid(&mut rng, w, h, 0.05, 0.04);
        let mut unknown = vec![false; w * h];
        for (i, u) in unknown.iter_mut().enumerate() {
            if !occ[i] && rng.unit() < 0.03 {
                *u = true;
                grid.set_state(Cell::new(i % w, i / w), CellState::Unknown);
            }
        }
        let radius = rng.range(0.0, 0.4);
        let mask = inflate(&grid, radius);
        let oracle = brute_inflate(w, h, &occ, radius / 0.05);
        for i in 0..w * h {
            assert_eq!(mask.blocked()[i], oracle[i] || unknown[i], "cell {i} radius {radius}");
        }
    }
}

#[test]
fn wall_flips_to_occupied_after_closed_form_hit_count() {
    // a free cell starts clamped at -5 and gains 0.85 per hit; it crosses
    // +2 after ceil(7 / 0.85) = 9 scans
    let mut grid = OccupancyGrid::<f64>::new_free(GridGeometry::new(40, 10, 0.1, Point::new(0.0, 0.0)));
    let p = *grid.params();
    let needed = ((p.occupied_above + p.clamp) / p.l_hit).floor() as usize + 1;
    assert_eq!(needed, 9);
    let pose = Pose::new(0.55, 0.55, 0.0);
    let spec = ScanSpec { fov: 0.01, beam_count: 1, max_range: 3.0 };
    let scan = RangeScan { spec, ranges: vec![2.0] };
    let target = grid.world_to_cell(Point::new(2.56, 0.55)).unwrap();
    for k in 1..=needed {
        update_from_scan(&mut grid, &pose, &scan).unwrap();
        let expected = grid.params().clamp * -1.0 + p.l_hit * k as f64;
        assert!((grid.log_odds(target) - expected).abs() < 1e-12, "after {k} hits");
        assert_eq!(grid.state(target) == CellState::Occupied, k == needed, "after {k} hits");
    }
    // cells the beam crossed only became more certainly free
    let crossed = grid.world_to_cell(Point::new(1.5, 0.55)).unwrap();
    assert_eq!(grid.state(crossed), CellState::Free);
    assert_eq!(grid.log_odds(crossed), -p.clamp);
}

fn any_states(w: usize, h: usize) -> impl Strategy<Value = Vec<CellState>> {
    prop::collection::vec(prop_oneof![Just(CellState::Free), Just(CellState::Occupied), Just(CellState::Unknown)], w * h)
}

proptest! {
    #[test]
    fn map_text_round_trips(states in any_states(12, 9)) {
        let mut grid = OccupancyGrid::<f64>::new_unknown(GridGeometry::new(12, 9, 0.05, Point::new(-1.0, 2.0)));
        for (i, s) in states.iter().enumerate() {
            grid.set_state(Cell::new(i % 12, i / 12), *s);
        }
        let back: OccupancyGrid<f64> = parse_map(&format_map(&grid)).unwrap();
        prop_assert_eq!(back.states(), grid.states());
        prop_assert_eq!(back.geometry(), grid.geometry());
    }

    #[test]
    fn inflation_is_monotone_in_radius(states in any_states(14, 14), r1 in 0.0..0.3f64, dr in 0.0..0.3f64) {
        let mut grid = OccupancyGrid::<f64>::new_unknown(GridGeometry::new(14, 14, 0.05, Point::new(0.0, 0.0)));
        for (i, s) in states.iter().enumerate() {
            grid.set_state(Cell::new(i % 14, i / 14), *s);
        }
        let small = inflate(&grid, r1);
        let large = inflate(&grid, r1 + dr);
        for (a, b) in small.blocked().iter().zip(large.blocked()) {
            prop_assert!(!a || *b);
        }
    }

    #[test]
    fn log_odds_stay_clamped(hits in prop::collection::vec(any::<bool>(), 1..60)) {
        let mut grid = OccupancyGrid::<f64>::new_unknown(GridGeometry::new(30, 5, 0.1, Point::new(0.0, 0.0)));
        let pose = Pose::new(0.25, 0.25, 0.0);
        let spec = ScanSpec { fov: 0.01, beam_count: 1, max_range: 2.0 };
        for hit in hits {
            let scan = RangeScan { spec, ranges: vec![if hit { 1.5 } else { 2.0 }] };
            update_from_scan(&mut grid, &pose, &scan).unwrap();
            let c = grid.params().clamp;
            prop_assert!(grid.log_odds_raster().iter().all(|l| l.abs() <= c));
        }
    }
}
