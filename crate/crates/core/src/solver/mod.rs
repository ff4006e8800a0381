//! The game-theoretic solver: estimated costs, best replies, the iterated
//! reply loop and the equilibrium check.

pub mod best_reply;
pub mod estimate;
pub mod game;
pub mod nash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::scalar::Real;

pub use best_reply::{best_reply, closed_form_reply, refined_reply, MarginalCost, Reply, ReplyTerm};
pub use estimate::{
    available_rate, capacity_factor, estimated_dc_cost, estimated_delay_cost, estimated_network_cost,
    estimated_power, lagrangian, nc_max, overall_cost, pd_max,
};
pub use game::{nild_solve, DcEstimate, EstimatorContext};
pub use nash::nash_check;

/// Per-(task type, data center) arrival rates for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationMatrix<T> {
    pub ar: RateMatrix<T>,
    pub epoch: usize,
}

/// Relative tolerance on `Σ_d AR[i][d] = GAR[i]`.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

impl<T: Real> AllocationMatrix<T> {
    pub fn zeros(tasks: usize, dcs: usize, epoch: usize) -> Self {
        Self {
            ar: RateMatrix::zeros(tasks, dcs),
            epoch,
        }
    }

    /// Checks nonnegativity, conservation and the `(1 − margin)·ER` bound.
    pub fn check(&self, er: &RateMatrix<T>, gar: &[T], margin: T) -> Result<()> {
        for (i, &g) in gar.iter().enumerate() {
            let sum = self.ar.row_sum(i);
            let tol = T::lit(CONSERVATION_TOLERANCE) * g.abs().max(T::one());
            if (sum - g).abs() > tol {
                return Err(Error::validation(
                    format!("allocation[{i}]"),
                    format!("row sums to {sum}, arrival rate is {g}"),
                ));
            }
            for d in 0..self.ar.cols() {
                let x = self.ar.get(i, d);
                let cap = (T::one() - margin) * er.get(i, d);
                if !(x >= T::zero()) || x > cap * (T::one() + T::epsilon()) {
                    return Err(Error::validation(
                        format!("allocation[{i}][{d}]"),
                        format!("{x} outside [0, {cap}]"),
                    ));
                }
            }
        }
        for d in 0..self.ar.cols() {
            let u: T = (0..self.ar.rows()).map(|i| self.ar.get(i, d) / er.get(i, d)).sum();
            if u >= T::one() {
                return Err(Error::validation(
                    format!("allocation[*][{d}]"),
                    format!("utilization {u} leaves no headroom"),
                ));
            }
        }
        Ok(())
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Full passes over the players, the opening pass from the all-zero
    /// profile included.
    pub iterations: usize,
    /// `Σ_i |OC_i(previous pass) − OC_i(this pass)|` after each pass.
    pub norm_history: Vec<f64>,
    pub converged: bool,
    /// Rates moved by the safety projection of a best reply.
    pub projections_applied: usize,
}
