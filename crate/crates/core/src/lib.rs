//! Geo-distributed data-center workload management: a co-location-aware
//! capacity model, realized power and cost accounting, a game-theoretic load
//! distribution solver with comparison baselines, and an epoch simulator.
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the simulator uses.

pub mod accounting;
pub mod baselines;
pub mod colocation;
pub mod error;
pub mod matrix;
pub mod scalar;
pub mod scenario;
pub mod simulator;
pub mod solver;

pub use baselines::SolverKind;
pub use error::{Error, Result};
pub use scalar::Real;
pub use scenario::ScenarioConfig;

pub type Allocation = solver::AllocationMatrix<f64>;
pub type Capacity = colocation::CapacitySnapshot<f64>;
pub type Costs = accounting::CostBreakdown<f64>;
pub type Power = accounting::PowerBreakdown<f64>;
pub type Tracker = accounting::PeakTracker<f64>;
pub type Estimator = solver::EstimatorContext<f64>;
pub type Rates = matrix::RateMatrix<f64>;
