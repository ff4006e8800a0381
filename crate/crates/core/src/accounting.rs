//! Realized per-epoch power and money.
//!
//! IT power is affine in utilization: every node draws its idle power, and
//! each task type adds its utilization share `AR/ER` of the data center's
//! peak dynamic budget. Cooling is a fixed fraction of IT power. Net grid
//! power follows the usual overhead-minus-renewables form and may go negative,
//! in which case exported energy is credited at the net-metering fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::{DataCenterSpec, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown<T> {
    pub it_power: T,
    pub cooling_power: T,
    pub renewable: T,
    pub net_power: T,
}

impl<T: Real> PowerBreakdown<T> {
    /// `(it + cooling) · eff − renewable`.
    pub fn from_parts(it_power: T, cooling_power: T, efficiency: T, renewable: T) -> Self {
        Self {
            it_power,
            cooling_power,
            renewable,
            net_power: (it_power + cooling_power) * efficiency - renewable,
        }
    }

    /// Power drawn from the grid (exports count as zero).
    pub fn grid_draw(&self) -> T {
        self.net_power.max(T::zero())
    }
}

/// Idle and peak-dynamic kW summed over a data center's inventory.
pub fn inventory_power(scenario: &ScenarioConfig, dc: &DataCenterSpec) -> (f64, f64) {
    dc.node_inventory.iter().fold((0.0, 0.0), |(idle, dynamic), (id, &n)| {
        let nt = scenario.node_type(id).expect("validated node type");
        (
            idle + f64::from(n) * nt.idle_power,
            dynamic + f64::from(n) * nt.avg_peak_dynamic_power,
        )
    })
}

/// Realized power of one data center for one epoch.
pub fn realized_power(
    scenario: &ScenarioConfig,
    dc: &DataCenterSpec,
    allocation: &[f64],
    capacity: &[f64],
    renewable: f64,
) -> Result<PowerBreakdown<f64>> {
    let mut utilization = 0.0;
    for (i, (&ar, &er)) in allocation.iter().zip(capacity).enumerate() {
        if ar < 0.0 || ar >= er {
            return Err(Error::CapacityExceeded {
                task: scenario.task_types[i].id.clone(),
                dc: dc.id.clone(),
                ar,
                er,
            });
        }
        utilization += ar / er;
    }
    let (idle, dynamic) = inventory_power(scenario, dc);
    let it = idle + dynamic * utilization;
    Ok(PowerBreakdown::from_parts(
        it,
        dc.cooling_factor * it,
        dc.power_efficiency,
        renewable,
    ))
}

/// Billing-period peak state for every data center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTracker<T> {
    /// Highest grid draw before the current epoch, per data center.
    pub prior_peak: Vec<T>,
    /// Highest grid draw including the current epoch, per data center.
    pub current_peak: Vec<T>,
    pub peak_price: Vec<T>,
}

impl<T: Real> PeakTracker<T> {
    pub fn new(peak_price: Vec<T>) -> Self {
        let n = peak_price.len();
        Self {
            prior_peak: vec![T::zero(); n],
            current_peak: vec![T::zero(); n],
            peak_price,
        }
    }

    pub fn for_scenario(scenario: &ScenarioConfig) -> Self {
        Self::new(scenario.data_centers.iter().map(|d| T::lit(d.peak_price)).collect())
    }

    /// Starts a new billing period.
    pub fn reset(&mut self) {
        self.prior_peak.iter_mut().for_each(|p| *p = T::zero());
        self.current_peak.iter_mut().for_each(|p| *p = T::zero());
    }

    /// Peak charge increase caused by this epoch's grid draw at `dc`; advances
    /// the prior peak when a new maximum is set.
    pub fn peak_increase(&mut self, dc: usize, grid_draw: T) -> T {
        let grid = grid_draw.max(T::zero());
        let prior = self.prior_peak[dc];
        if grid >= prior {
            self.current_peak[dc] = grid;
            self.prior_peak[dc] = grid;
            self.peak_price[dc] * (grid - prior)
        } else {
            self.current_peak[dc] = prior;
            T::zero()
        }
    }
}

/// `N_price · Σ_i S_i · AR_i · T_e`: every task assigned to the data center
/// moves its input once.
pub fn network_cost<T: Real>(price_per_gb: T, data_sizes: &[T], allocation: &[T], epoch_hours: T) -> T {
    data_sizes
        .iter()
        .zip(allocation)
        .map(|(&s, &ar)| s * ar * epoch_hours)
        .sum::<T>()
        * price_per_gb
}

/// Energy bill for one epoch; exports are credited at `alpha` of retail.
pub fn energy_cost<T: Real>(price: T, alpha: T, net_power: T, epoch_hours: T) -> T {
    let factor = if net_power >= T::zero() { T::one() } else { alpha };
    price * factor * net_power * epoch_hours
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<T> {
    pub energy_cost: T,
    pub peak_cost: T,
    pub network_cost: T,
    pub total: T,
    /// Expected queueing delay per task type, hours.
    pub delay: Vec<T>,
}

/// Data-center cost for one epoch: energy + peak increase + network.
pub fn data_center_cost<T: Real>(
    price: T,
    alpha: T,
    power: &PowerBreakdown<T>,
    peak: T,
    network: T,
    epoch_hours: T,
) -> CostBreakdown<T> {
    let energy = energy_cost(price, alpha, power.net_power, epoch_hours);
    CostBreakdown {
        energy_cost: energy,
        peak_cost: peak,
        network_cost: network,
        total: energy + peak + network,
        delay: Vec::new(),
    }
}

/// Expected queueing delay `1 / (er − ar)` in hours.
pub fn queueing_delay<T: Real>(er: T, ar: T) -> Result<T> {
    if ar >= er || ar < T::zero() {
        return Err(Error::InfeasibleQueue {
            ar: ar.as_f64(),
            er: er.as_f64(),
        });
    }
    Ok(T::one() / (er - ar))
}
