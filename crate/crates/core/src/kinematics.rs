//! Robot state, tracking-error dynamics, the nonlinear tracking law and the
//! unicycle plant used by the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{normalize_angle, sinc, Real};

/// A point in the global frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Point<T: Real> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar robot state `[x, y, theta]` in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct Pose<T: Real> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose<T> {
    /// Builds a pose, wrapping the heading into `(-pi, pi]`.
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }

    /// Expresses a global point in this pose's body frame.
    pub fn to_local(&self, p: Point<T>) -> Point<T> {
        let (s, c) = self.theta.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point::new(c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Reference-relative error expressed in the robot frame.
///
/// `e1` is longitudinal, `e2` lateral, `e3` the heading error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrackingError<T: Real> {
    pub e1: T,
    pub e2: T,
    pub e3: T,
}

impl<T: Real> TrackingError<T> {
    /// Norm of the positional part `(e1, e2)`.
    pub fn position_norm(&self) -> T {
        self.e1.hypot(self.e2)
    }
}

/// Linear and angular velocity actuation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VelocityCommand<T: Real> {
    pub v: T,
    pub omega: T,
}

impl<T: Real> VelocityCommand<T> {
    pub fn new(v: T, omega: T) -> Self {
        Self { v, omega }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn saturate(self, limits: &Limits<T>) -> Self {
        Self {
            v: clamp_abs(self.v, limits.v_max),
            omega: clamp_abs(self.omega, limits.omega_max),
        }
    }
}

fn clamp_abs<T: Real>(x: T, bound: T) -> T {
    x.max(-bound).min(bound)
}

/// Gains of the tracking law. All strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct ControlGains<T: Real> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
}

impl<T: Real> Default for ControlGains<T> {
    fn default() -> Self {
        Self {
            k1: T::one(),
            k2: T::lit(4.0),
            k3: T::lit(2.0),
        }
    }
}

impl<T: Real> ControlGains<T> {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.k1 > T::zero() && self.k2 > T::zero() && self.k3 > T::zero() {
            Ok(())
        } else {
            Err(KinematicsError::InvalidGains)
        }
    }
}

/// Actuator saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default)]
pub struct Limits<T: Real> {
    pub v_max: T,
    pub omega_max: T,
}

impl<T: Real> Default for Limits<T> {
    fn default() -> Self {
        Self {
            v_max: T::lit(0.5),
            omega_max: T::lit(1.5),
        }
    }
}

/// Which form of the angular correction term to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawVariant {
    /// `u2 = -k2 v_d sinc(e3) e2 - k3 e3`: zero correction at zero error.
    #[default]
    LateralFactor,
    /// `u2 = -k2 v_d sinc(e3) - k3 e3`, which lacks the `e2` factor and is
    /// biased at zero error. Kept only for comparison runs.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("reference speed below the degeneracy floor")]
    DegenerateVelocity,
    #[error("control gains must be strictly positive")]
    InvalidGains,
}

/// Default floor under which the reference speed is considered degenerate.
pub const EPS_VEL: f64 = 1e-3;

/// Rotates the global pose error into the robot frame.
pub fn tracking_error<T: Real>(pose: &Pose<T>, reference: &Pose<T>) -> TrackingError<T> {
    let local = pose.to_local(reference.position());
    TrackingError {
        e1: local.x,
        e2: local.y,
        e3: normalize_angle(reference.theta - pose.theta),
    }
}

/// Desired `(v_d, w_d)` from reference velocity and acceleration.
pub fn desired_velocities<T: Real>(
    xd: T,
    yd: T,
    xdd: T,
    ydd: T,
    eps_vel: T,
) -> Result<(T, T), KinematicsError> {
    let speed_sq = xd * xd + yd * yd;
    if speed_sq <= eps_vel * eps_vel {
        return Err(KinematicsError::DegenerateVelocity);
    }
    Ok((speed_sq.sqrt(), (ydd * xd - xdd * yd) / speed_sq))
}

/// Tracking law before saturation.
pub fn control_law_unsaturated<T: Real>(
    e: &TrackingError<T>,
    v_d: T,
    w_d: T,
    gains: &ControlGains<T>,
    variant: LawVariant,
) -> VelocityCommand<T> {
    let u1 = -gains.k1 * e.e1;
    let lateral = match variant {
        LawVariant::LateralFactor => e.e2,
        LawVariant::AsPrinted => T::one(),
    };
    let u2 = -gains.k2 * v_d * sinc(e.e3) * lateral - gains.k3 * e.e3;
    VelocityCommand::new(v_d * e.e3.cos() - u1, w_d - u2)
}

/// Tracking law with actuator saturation applied.
pub fn control_law<T: Real>(
    e: &TrackingError<T>,
    v_d: T,
    w_d: T,
    gains: &ControlGains<T>,
    limits: &Limits<T>,
    variant: LawVariant,
) -> VelocityCommand<T> {
    control_law_unsaturated(e, v_d, w_d, gains, variant).saturate(limits)
}

/// Instantaneous turning radius `v / omega`; infinite when not turning.
pub fn turning_radius<T: Real>(cmd: &VelocityCommand<T>) -> T {
    if cmd.omega == T::zero() {
        T::infinity()
    } else {
        cmd.v / cmd.omega
    }
}

/// Advances a unicycle along the exact arc traced by a constant command.
pub fn integrate_unicycle<T: Real>(pose: &Pose<T>, cmd: &VelocityCommand<T>, dt: T) -> Pose<T> {
    let dtheta = cmd.omega * dt;
    if cmd.omega.abs() < T::lit(1e-9) {
        let (s, c) = pose.theta.sin_cos();
        let d = cmd.v * dt;
        return Pose::new(pose.x + d * c, pose.y + d * s, pose.theta + dtheta);
    }
    let r = cmd.v / cmd.omega;
    let th1 = pose.theta + dtheta;
    Pose::new(
        pose.x + r * (th1.sin() - pose.theta.sin()),
        pose.y - r * (th1.cos() - pose.theta.cos()),
        th1,
    )
}
