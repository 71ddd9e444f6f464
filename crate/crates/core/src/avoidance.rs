//! Vector-field-histogram local avoidance.
//!
//! Range readings are binned into a polar density histogram in the robot
//! frame. Runs of low-density sectors ("valleys") at least `s_max` sectors
//! wide are admissible directions. The chosen direction is turned into an
//! arc command through a look-ahead point one meter out, and the angular
//! rate is low-pass filtered.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Point, Pose, VelocityCommand};
use crate::scalar::{normalize_angle, Real};
use crate::world::RangeScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AvoidanceError {
    #[error("reference point coincides with the robot position")]
    RefAtOrigin,
    #[error("no admissible valley in the polar histogram")]
    NoValley,
    #[error("IIR coefficients must satisfy a1 + b0 = 1 and 0 <= a1 < 1")]
    UnstableFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct VfhParams<T: Real> {
    /// Sector width, radians.
    pub sector_width: T,
    /// Density at or above which a sector is blocked.
    pub threshold: T,
    /// Minimum admissible valley width, in sectors.
    pub s_max: usize,
    /// Nearest-range distance that switches the robot into avoidance.
    pub d_near: T,
    /// Extra clearance required before leaving avoidance.
    pub hysteresis: T,
    /// Constant linear speed while avoiding.
    pub v_const: T,
    /// Ranges at or beyond this distance do not contribute.
    pub active_window: T,
}

impl<T: Real> Default for VfhParams<T> {
    fn default() -> Self {
        Self {
            sector_width: T::lit(5f64.to_radians()),
            threshold: T::one(),
            s_max: 4,
            d_near: T::lit(0.6),
            hysteresis: T::lit(0.2),
            v_const: T::lit(0.2),
            active_window: T::lit(1.5),
        }
    }
}

/// Obstacle density per angular sector, robot frame.
///
/// Sector `i` is centered on `(i + first_sector) * sector_width`, so the
/// sector with offset 0 is centered on the heading. A full-circle histogram
/// wraps around; a partial one covers the scanner field of view only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PolarHistogram<T: Real> {
    pub densities: Vec<T>,
    pub sector_width: T,
    pub first_sector: i64,
    pub circular: bool,
}

impl<T: Real> PolarHistogram<T> {
    /// Empty histogram laid out to cover `fov` radians.
    pub fn for_fov(fov: T, sector_width: T) -> Self {
        let full = (fov - T::TAU()).abs() < T::lit(1e-9);
        if full {
            let n = (T::TAU() / sector_width).round().to_usize().unwrap_or(1).max(1);
            Self {
                densities: vec![T::zero(); n],
                sector_width,
                first_sector: 0,
                circular: true,
            }
        } else {
            let half = (fov / T::lit(2.0) / sector_width - T::lit(0.5)).ceil().to_i64().unwrap_or(0).max(0);
            Self {
                densities: vec![T::zero(); (2 * half + 1) as usize],
                sector_width,
                first_sector: -half,
                circular: false,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn center_angle(&self, i: usize) -> T {
        normalize_angle(T::from_i64(i as i64 + self.first_sector).unwrap() * self.sector_width)
    }

    /// Sector containing a robot-frame angle, if the histogram covers it.
    pub fn sector_of(&self, angle: T) -> Option<usize> {
        let n = self.len() as i64;
        // half-open [center - w/2, center + w/2) so shifting by whole sectors
        // shifts the assignment
        let half = T::lit(0.5);
        if self.circular {
            let k = (normalize_angle(angle) / self.sector_width + half).floor().to_i64()?;
            Some(k.rem_euclid(n) as usize)
        } else {
            let k = (angle / self.sector_width + half).floor().to_i64()? - self.first_sector;
            (0..n).contains(&k).then_some(k as usize)
        }
    }

    pub fn is_free(&self, i: usize, threshold: T) -> bool {
        self.densities[i] < threshold
    }
}

/// Robot-frame bearing of a global reference point.
pub fn local_target<T: Real>(pose: &Pose<T>, reference: Point<T>) -> Result<T, AvoidanceError> {
    if pose.position().distance(&reference) < T::lit(1e-6) {
        return Err(AvoidanceError::RefAtOrigin);
    }
    let local = pose.to_local(reference);
    Ok(normalize_angle(local.y.atan2(local.x)))
}

/// Each beam closer than `active_window` adds `(window - r) / window` to
/// the sector holding its angle.
pub fn build_histogram<T: Real>(scan: &RangeScan<T>, params: &VfhParams<T>) -> PolarHistogram<T> {
    let mut hist = PolarHistogram::for_fov(scan.spec.fov, params.sector_width);
    let w = params.active_window;
    for (angle, r) in scan.beams() {
        if r >= w || r >= scan.spec.max_range {
            continue;
        }
        if let Some(i) = hist.sector_of(angle) {
            hist.densities[i] += (w - r) / w;
        }
    }
    hist
}

/// Maximal run of free sectors: `start` index and length. On a circular
/// histogram the run may wrap past the last index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Valley {
    pub start: usize,
    pub len: usize,
}

impl Valley {
    pub fn end(&self, n: usize) -> usize {
        (self.start + self.len - 1) % n
    }

    pub fn contains(&self, i: usize, n: usize) -> bool {
        (i + n - self.start) % n < self.len
    }
}

pub fn find_valleys<T: Real>(hist: &PolarHistogram<T>, threshold: T) -> Vec<Valley> {
    let n = hist.len();
    let free: Vec<bool> = (0..n).map(|i| hist.is_free(i, threshold)).collect();
    if free.iter().all(|f| *f) {
        return vec![Valley { start: 0, len: n }];
    }
    let mut valleys = Vec::new();
    let mut i = 0;
    while i < n {
        if free[i] && (i == 0 || !free[i - 1]) {
            let mut len = 0;
            while i + len < n && free[i + len] {
                len += 1;
            }
            valleys.push(Valley { start: i, len });
            i += len;
        } else {
            i += 1;
        }
    }
    if hist.circular && valleys.len() > 1 && free[0] && free[n - 1] {
        // join the run that wraps through index 0
        let head = valleys.remove(0);
        let tail = valleys.last_mut().unwrap();
        tail.len += head.len;
    }
    valleys
}

/// Outcome of valley selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Steering<T: Real> {
    pub angle: T,
    pub valley: Valley,
    /// The target direction itself was admissible.
    pub direct: bool,
}

/// Picks the steering direction for target bearing `target`.
///
/// If the target's sector lies in an admissible valley the target itself is
/// returned. Otherwise the valley border sector angularly closest to the
/// target wins (ties: lower valley start, then the start border), and the
/// robot steers `s_max / 2` sectors inside that border.
pub fn select_steering<T: Real>(hist: &PolarHistogram<T>, target: T, params: &VfhParams<T>) -> Result<Steering<T>, AvoidanceError> {
    let n = hist.len();
    let s_max = params.s_max.max(1);
    let valleys: Vec<Valley> = find_valleys(hist, params.threshold)
        .into_iter()
        .filter(|v| v.len >= s_max)
        .collect();
    if valleys.is_empty() {
        return Err(AvoidanceError::NoValley);
    }
    if let Some(ts) = hist.sector_of(target) {
        if let Some(v) = valleys.iter().find(|v| v.contains(ts, n)) {
            return Ok(Steering {
                angle: normalize_angle(target),
                valley: *v,
                direct: true,
            });
        }
    }
    let inset = s_max / 2;
    let mut best: Option<(T, usize)> = None;
    let mut best_steer = None;
    for v in &valleys {
        let borders = [(v.start, (v.start + inset) % n), (v.end(n), (v.end(n) + n - inset) % n)];
        for (border, steer) in borders {
            let d = normalize_angle(hist.center_angle(border) - target).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, border));
                best_steer = Some(Steering {
                    angle: hist.center_angle(steer),
                    valley: *v,
                    direct: false,
                });
            }
        }
    }
    Ok(best_steer.expect("at least one admissible valley"))
}

/// Arc command toward a look-ahead point one meter out along `theta`:
/// `v = v_const`, `omega = 2 v sin(theta)`. Past +-90 degrees the rate is
/// held at its maximum `2 v`; the second value flags that case.
pub fn steer_to_command<T: Real>(theta: T, params: &VfhParams<T>) -> (VelocityCommand<T>, bool) {
    let v = params.v_const;
    let two_v = v + v;
    if theta.abs() > T::FRAC_PI_2() {
        (VelocityCommand::new(v, two_v * theta.signum()), true)
    } else {
        (VelocityCommand::new(v, two_v * theta.sin()), false)
    }
}

/// First-order low-pass on the angular rate: `w = a1 w_prev + b0 w_new`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IirState<T: Real> {
    pub a1: T,
    pub b0: T,
    pub omega_prev: T,
}

impl<T: Real> Default for IirState<T> {
    fn default() -> Self {
        Self {
            a1: T::lit(0.7),
            b0: T::lit(0.3),
            omega_prev: T::zero(),
        }
    }
}

impl<T: Real> IirState<T> {
    pub fn new(a1: T, b0: T) -> Result<Self, AvoidanceError> {
        let s = Self {
            a1,
            b0,
            omega_prev: T::zero(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AvoidanceError> {
        let unit_gain = (self.a1 + self.b0 - T::one()).abs() <= T::lit(1e-12);
        if unit_gain && self.a1 >= T::zero() && self.a1 < T::one() {
            Ok(())
        } else {
            Err(AvoidanceError::UnstableFilter)
        }
    }

    pub fn reset(&mut self, omega: T) {
        self.omega_prev = omega;
    }
}

pub fn smooth_command<T: Real>(omega_new: T, state: &mut IirState<T>) -> T {
    let out = state.a1 * state.omega_prev + state.b0 * omega_new;
    state.omega_prev = out;
    out
}
