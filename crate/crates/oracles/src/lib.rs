//! Slow, obviously-correct reference implementations.
//!
//! Nothing here shares code with `hybridnav-core`: inputs and outputs are
//! plain slices and numbers so the checks stay independent of the code
//! under test.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Tiny deterministic generator (SplitMix64) so oracle inputs do not depend
/// on any RNG crate the library might also use.
#[derive(Debug, Clone)]
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.partial_cmp(&self.cost).unwrap().then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path cost on a row-major grid, returned as
/// (straight moves, diagonal moves). Diagonals may not cut a blocked
/// orthogonal neighbor. `None` when the goal is unreachable or an endpoint
/// is blocked.
///
/// Costs are accumulated as `s + d * sqrt(2)` in f64; for grids up to a few
/// hundred cells a side distinct (s, d) pairs differ by far more than the
/// rounding error, so the returned pair is exact.
pub fn dijkstra(width: usize, height: usize, blocked: &[bool], start: (usize, usize), goal: (usize, usize)) -> Option<(u64, u64)> {
    let id = |c: usize, r: usize| r * width + c;
    if blocked[id(start.0, start.1)] || blocked[id(goal.0, goal.1)] {
        return None;
    }
    let n = width * height;
    let mut dist = vec![f64::INFINITY; n];
    let mut moves = vec![(0u64, 0u64); n];
    let mut done = vec![false; n];
    let s = id(start.0, start.1);
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([Entry { cost: 0.0, idx: s }]);
    while let Some(Entry { cost, idx }) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        if idx == id(goal.0, goal.1) {
            return Some(moves[idx]);
        }
        let (c, r) = ((idx % width) as i64, (idx / width) as i64);
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= width as i64 || nr >= height as i64 {
                    continue;
                }
                let j = id(nc as usize, nr as usize);
                if blocked[j] {
                    continue;
                }
                let diagonal = dc != 0 && dr != 0;
                if diagonal && (blocked[id(nc as usize, r as usize)] || blocked[id(c as usize, nr as usize)]) {
                    continue;
                }
                let step = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
                if cost + step < dist[j] - 1e-12 {
                    dist[j] = cost + step;
                    let (ms, md) = moves[idx];
                    moves[j] = if diagonal { (ms, md + 1) } else { (ms + 1, md) };
                    heap.push(Entry { cost: dist[j], idx: j });
                }
            }
        }
    }
    None
}

/// Cells blocked after growing `occupied` by `radius` cells of center
/// distance, by testing every pair of cells.
pub fn brute_inflate(width: usize, height: usize, occupied: &[bool], radius_cells: f64) -> Vec<bool> {
    let mut out = vec![false; width * height];
    for r in 0..height {
        for c in 0..width {
            'search: for orow in 0..height {
                for ocol in 0..width {
                    if !occupied[orow * width + ocol] {
                        continue;
                    }
                    let dx = c as f64 - ocol as f64;
                    let dy = r as f64 - orow as f64;
                    if dx * dx + dy * dy <= radius_cells * radius_cells + 1e-9 {
                        out[r * width + c] = true;
                        break 'search;
                    }
                }
            }
        }
    }
    out
}

/// Distance along a ray to the first occupied cell, by marching in steps of
/// `step` meters. Grid origin at (0, 0), square cells of `res` meters.
pub fn march_ray(
    width: usize,
    height: usize,
    res: f64,
    occupied: &[bool],
    origin: (f64, f64),
    angle: f64,
    max_range: f64,
    step: f64,
) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut t = 0.0;
    while t < max_range {
        let x = origin.0 + t * dx;
        let y = origin.1 + t * dy;
        if x < 0.0 || y < 0.0 {
            return max_range;
        }
        let (c, r) = ((x / res).floor() as usize, (y / res).floor() as usize);
        if c >= width || r >= height {
            return max_range;
        }
        if occupied[r * width + c] {
            return t;
        }
        t += step;
    }
    max_range
}

/// Least squares through the normal equations `AᵀA x = Aᵀb`, solved by
/// Gaussian elimination with partial pivoting. `a` is row-major `m × n`.
pub fn normal_equations(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    let mut m = vec![vec![0.0; n + 1]; n];
    for (row, &bi) in a.iter().zip(b) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += row[i] * row[j];
            }
            m[i][n] += row[i] * bi;
        }
    }
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Euclidean norm of `A x − b`.
pub fn residual_norm(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, bi)| {
            let ax: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
            (ax - bi).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Integrates the unicycle with `substeps` forward-Euler steps.
pub fn euler_unicycle(pose: (f64, f64, f64), v: f64, omega: f64, dt: f64, substeps: usize) -> (f64, f64, f64) {
    let h = dt / substeps as f64;
    let (mut x, mut y, mut th) = pose;
    for _ in 0..substeps {
        x += v * th.cos() * h;
        y += v * th.sin() * h;
        th += omega * h;
    }
    (x, y, th)
}

/// Bearing of a world point in the robot frame, via the inverse of the
/// homogeneous transform of the pose.
pub fn bearing_via_homogeneous(pose: (f64, f64, f64), p: (f64, f64)) -> f64 {
    let (c, s) = (pose.2.cos(), pose.2.sin());
    let m = [[c, -s, pose.0], [s, c, pose.1], [0.0, 0.0, 1.0]];
    // inverse of [R t; 0 1] is [Rᵀ −Rᵀt; 0 1]
    let inv = [
        [m[0][0], m[1][0], -(m[0][0] * m[0][2] + m[1][0] * m[1][2])],
        [m[0][1], m[1][1], -(m[0][1] * m[0][2] + m[1][1] * m[1][2])],
        [0.0, 0.0, 1.0],
    ];
    let lx = inv[0][0] * p.0 + inv[0][1] * p.1 + inv[0][2];
    let ly = inv[1][0] * p.0 + inv[1][1] * p.1 + inv[1][2];
    ly.atan2(lx)
}

/// Scores every valley border against the target and returns the steering
/// sector chosen by the nearest-border rule, or `None` without a valley of
/// at least `s_max` sectors. `free` is the per-sector admissibility,
/// `center(i)` the sector center angle, `target_sector` the sector holding
/// the target if the histogram covers it.
pub fn steer_exhaustive(
    free: &[bool],
    circular: bool,
    s_max: usize,
    center: impl Fn(usize) -> f64,
    target: f64,
    target_sector: Option<usize>,
) -> Option<(f64, bool)> {
    let n = free.len();
    // enumerate valleys as explicit sector lists
    let mut valleys: Vec<Vec<usize>> = Vec::new();
    if free.iter().all(|f| *f) {
        valleys.push((0..n).collect());
    } else {
        let start = if circular { (0..n).find(|&i| !free[i]).unwrap() } else { 0 };
        let mut cur: Vec<usize> = Vec::new();
        for k in 0..n {
            let i = (start + k) % n;
            if free[i] {
                cur.push(i);
            } else if !cur.is_empty() {
                valleys.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            valleys.push(cur);
        }
    }
    valleys.retain(|v| v.len() >= s_max.max(1));
    if valleys.is_empty() {
        return None;
    }
    if let Some(ts) = target_sector {
        if valleys.iter().any(|v| v.contains(&ts)) {
            return Some((target, true));
        }
    }
    let wrap = |a: f64| {
        let mut a = a % std::f64::consts::TAU;
        if a > std::f64::consts::PI {
            a -= std::f64::consts::TAU;
        }
        if a <= -std::f64::consts::PI {
            a += std::f64::consts::TAU;
        }
        a
    };
    let inset = s_max.max(1) / 2;
    let mut best: Option<(f64, f64)> = None;
    for v in &valleys {
        let first = v[0];
        let last = v[v.len() - 1];
        let options = [(first, v[inset.min(v.len() - 1)]), (last, v[v.len() - 1 - inset.min(v.len() - 1)])];
        for (border, steer) in options {
            let d = wrap(center(border) - target).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, center(steer)));
            }
        }
    }
    best.map(|(_, a)| (a, false))
}
