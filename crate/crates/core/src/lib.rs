//! Hybrid global/local navigation for differential-drive robots.
//!
//! A* plans over an inflated occupancy grid, a least-squares quintic turns
//! the path into a time-parameterized reference, a nonlinear feedback law
//! tracks it, and a vector field histogram takes over whenever something
//! unexpected gets close. [`sim`] runs the whole stack in a deterministic
//! 2D world.
//!
//! Every numeric type is generic over [`Real`]; the aliases at the crate root
//! pick `f64`, with `*32` variants for `f32`.

pub mod avoidance;
pub mod kinematics;
pub mod linalg;
pub mod navigator;
pub mod planner;
pub mod scalar;
pub mod sim;
pub mod trajectory;
pub mod world;

pub use scalar::Real;

pub type Point = kinematics::Point<f64>;
pub type Pose = kinematics::Pose<f64>;
pub type VelocityCommand = kinematics::VelocityCommand<f64>;
pub type TrackingError = kinematics::TrackingError<f64>;
pub type OccupancyGrid = world::OccupancyGrid<f64>;
pub type PlanningMask = world::PlanningMask<f64>;
pub type RangeScan = world::RangeScan<f64>;
pub type ScanSpec = world::ScanSpec<f64>;
pub type PathPlan = planner::PathPlan<f64>;
pub type QuinticTrajectory = trajectory::QuinticTrajectory<f64>;
pub type TrajectoryConfig = trajectory::TrajectoryConfig<f64>;
pub type VfhParams = avoidance::VfhParams<f64>;
pub type NavConfig = navigator::NavConfig<f64>;
pub type Navigator = navigator::Navigator<f64>;

pub type Point32 = kinematics::Point<f32>;
pub type Pose32 = kinematics::Pose<f32>;
pub type VelocityCommand32 = kinematics::VelocityCommand<f32>;
pub type OccupancyGrid32 = world::OccupancyGrid<f32>;
pub type QuinticTrajectory32 = trajectory::QuinticTrajectory<f32>;
pub type Navigator32 = navigator::Navigator<f32>;
pub type Scenario32 = sim::Scenario<f32>;
pub type Simulation32 = sim::Simulation<f32>;
pub type Scenario = sim::Scenario<f64>;
pub type Simulation = sim::Simulation<f64>;
pub type SimTrace = sim::SimTrace<f64>;
