//! The epoch loop: arrivals, capacity, solve, realized accounting, peak
//! bookkeeping, and the run ledger.

use serde::{Deserialize, Serialize};

use crate::accounting::{
    data_center_cost, network_cost, queueing_delay, realized_power, CostBreakdown, PeakTracker, PowerBreakdown,
};
use crate::baselines::{solve_with, SolverKind};
use crate::colocation::capacity_snapshot;
use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::scenario::{arrival_vector, renewable_power, ScenarioConfig, EPOCHS_PER_DAY};
use crate::solver::{AllocationMatrix, SolveDiagnostics};

/// Mutable state carried from one epoch to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tracker: PeakTracker<f64>,
}

impl SimState {
    pub fn new(scenario: &ScenarioConfig) -> Self {
        Self {
            tracker: PeakTracker::for_scenario(scenario),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    pub epoch: usize,
    pub arrivals: Vec<f64>,
    pub allocation: AllocationMatrix<f64>,
    pub power: Vec<PowerBreakdown<f64>>,
    /// Per data center; `delay[i]` is the expected queueing delay of task
    /// type `i` there, hours.
    pub costs: Vec<CostBreakdown<f64>>,
    pub diagnostics: SolveDiagnostics,
}

impl EpochResult {
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().map(|c| c.total).sum()
    }

    /// `Σ_i delay[i]` at data center `d`.
    pub fn summed_delay(&self, d: usize) -> f64 {
        self.costs[d].delay.iter().sum()
    }
}

/// Horizon totals for one data center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcTotals {
    pub id: String,
    pub energy_cost: f64,
    pub peak_cost: f64,
    pub network_cost: f64,
    pub total_cost: f64,
    /// Highest grid draw in each billing period, kW.
    pub period_peak_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Mean over epochs of the delay summed over task types and data centers.
    pub mean_summed_delay: f64,
    pub max_summed_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub converged_epochs: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub projections_applied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    /// SHA-256 of the scenario document.
    pub fingerprint: String,
    pub solver: SolverKind,
    pub seed: u64,
    pub days: usize,
    pub dc_totals: Vec<DcTotals>,
    /// Σ over data centers and epochs of the data-center cost, $.
    pub total_cost: f64,
    pub delay: DelayStats,
    pub convergence: ConvergenceStats,
    pub epochs: Vec<EpochResult>,
}

/// One epoch with arrivals drawn from the scenario's workload.
pub fn run_epoch(state: &mut SimState, scenario: &ScenarioConfig, solver: SolverKind, epoch: usize) -> Result<EpochResult> {
    let gar = arrival_vector(&scenario.workload, &scenario.task_types, epoch);
    run_epoch_with_arrivals(state, scenario, solver, epoch, &gar)
}

/// One epoch with explicit arrival rates.
pub fn run_epoch_with_arrivals(
    state: &mut SimState,
    scenario: &ScenarioConfig,
    solver: SolverKind,
    epoch: usize,
    gar: &[f64],
) -> Result<EpochResult> {
    let mut inner = || -> Result<EpochResult> {
        let snapshot = capacity_snapshot(scenario, epoch);
        let (allocation, diagnostics) = solve_with(solver, scenario, &snapshot, gar, &state.tracker)?;
        let er = &snapshot.er;
        let ar = &allocation.ar;
        let sizes: Vec<f64> = scenario.task_types.iter().map(|t| t.data_size).collect();
        let p = &scenario.solver;

        let mut power = Vec::with_capacity(scenario.data_centers.len());
        let mut costs = Vec::with_capacity(scenario.data_centers.len());
        for (d, dc) in scenario.data_centers.iter().enumerate() {
            let column = ar.column(d);
            let capacity = er.column(d);
            let pr = renewable_power(scenario, dc, epoch)?;
            let pw = realized_power(scenario, dc, &column, &capacity, pr)?;
            let peak = state.tracker.peak_increase(d, pw.grid_draw());
            let net = network_cost(p.network_price, &sizes, &column, p.epoch_hours);
            let mut cost = data_center_cost(dc.price_at(epoch), dc.net_metering_factor, &pw, peak, net, p.epoch_hours);
            cost.delay = realized_delays(ar, er, d)?;
            power.push(pw);
            costs.push(cost);
        }
        Ok(EpochResult {
            epoch,
            arrivals: gar.to_vec(),
            allocation,
            power,
            costs,
            diagnostics,
        })
    };
    inner().map_err(|e| e.at_epoch(epoch))
}

/// Delay of each task type at `d`: the queue drains at the rate left over by
/// the other types.
fn realized_delays(ar: &RateMatrix<f64>, er: &RateMatrix<f64>, d: usize) -> Result<Vec<f64>> {
    let n = ar.rows();
    let u: Vec<f64> = (0..n).map(|i| ar.get(i, d) / er.get(i, d)).collect();
    let total: f64 = u.iter().sum();
    (0..n)
        .map(|i| {
            let others = total - u[i];
            queueing_delay(er.get(i, d) * (1.0 - others), ar.get(i, d))
        })
        .collect()
}

/// Runs `days · 24` consecutive epochs, resetting the peak tracker at every
/// billing-period boundary. `seed` replaces the workload's noise seed.
pub fn run_horizon(scenario: &ScenarioConfig, solver: SolverKind, days: usize, seed: u64) -> Result<RunReport> {
    if days == 0 {
        return Err(Error::validation("days", "must be at least 1"));
    }
    let fingerprint = scenario.fingerprint();
    let mut scenario = scenario.clone();
    scenario.workload.seed = seed;
    let period = EPOCHS_PER_DAY * scenario.billing_period_days as usize;
    let mut state = SimState::new(&scenario);
    let n_dc = scenario.data_centers.len();
    let mut totals: Vec<DcTotals> = scenario
        .data_centers
        .iter()
        .map(|dc| DcTotals {
            id: dc.id.clone(),
            energy_cost: 0.0,
            peak_cost: 0.0,
            network_cost: 0.0,
            total_cost: 0.0,
            period_peak_kw: Vec::new(),
        })
        .collect();
    let mut epochs = Vec::with_capacity(days * EPOCHS_PER_DAY);
    for epoch in 0..days * EPOCHS_PER_DAY {
        if epoch % period == 0 {
            if epoch > 0 {
                for (d, t) in totals.iter_mut().enumerate() {
                    t.period_peak_kw.push(state.tracker.prior_peak[d]);
                }
            }
            state.tracker.reset();
        }
        let r = run_epoch(&mut state, &scenario, solver, epoch)?;
        for (t, c) in totals.iter_mut().zip(&r.costs) {
            t.energy_cost += c.energy_cost;
            t.peak_cost += c.peak_cost;
            t.network_cost += c.network_cost;
            t.total_cost += c.total;
        }
        epochs.push(r);
    }
    for (d, t) in totals.iter_mut().enumerate().take(n_dc) {
        t.period_peak_kw.push(state.tracker.prior_peak[d]);
    }

    let series: Vec<f64> = epochs
        .iter()
        .map(|e| (0..n_dc).map(|d| e.summed_delay(d)).sum())
        .collect();
    let delay = DelayStats {
        mean_summed_delay: series.iter().sum::<f64>() / series.len() as f64,
        max_summed_delay: series.iter().copied().fold(0.0, f64::max),
    };
    let iters: Vec<usize> = epochs.iter().map(|e| e.diagnostics.iterations).collect();
    let convergence = ConvergenceStats {
        converged_epochs: epochs.iter().filter(|e| e.diagnostics.converged).count(),
        max_iterations: iters.iter().copied().max().unwrap_or(0),
        mean_iterations: iters.iter().sum::<usize>() as f64 / iters.len() as f64,
        projections_applied: epochs.iter().map(|e| e.diagnostics.projections_applied).sum(),
    };
    Ok(RunReport {
        scenario: scenario.name.clone(),
        fingerprint,
        solver,
        seed,
        days,
        total_cost: epochs.iter().map(EpochResult::total_cost).sum(),
        dc_totals: totals,
        delay,
        convergence,
        epochs,
    })
}

/// Delay summed over task types and data centers, per epoch.
pub fn queueing_delay_series(report: &RunReport) -> Vec<f64> {
    report
        .epochs
        .iter()
        .map(|e| (0..e.costs.len()).map(|d| e.summed_delay(d)).sum())
        .collect()
}

/// One row of the per-epoch table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub dc: String,
    pub energy_cost: f64,
    pub peak_cost: f64,
    pub network_cost: f64,
    pub total_cost: f64,
    pub net_power_kw: f64,
    pub renewable_kw: f64,
    pub sum_delay_hours: f64,
    pub solver_iterations: usize,
}

/// Column order of [`EpochRow`].
pub const EPOCH_COLUMNS: [&str; 10] = [
    "epoch",
    "dc",
    "energy_cost",
    "peak_cost",
    "network_cost",
    "total_cost",
    "net_power_kw",
    "renewable_kw",
    "sum_delay_hours",
    "solver_iterations",
];

/// Flattens a report into (epoch, data center) rows.
pub fn epoch_rows(report: &RunReport) -> Vec<EpochRow> {
    let mut rows = Vec::new();
    for e in &report.epochs {
        for (d, t) in report.dc_totals.iter().enumerate() {
            let c = &e.costs[d];
            rows.push(EpochRow {
                epoch: e.epoch,
                dc: t.id.clone(),
                energy_cost: c.energy_cost,
                peak_cost: c.peak_cost,
                network_cost: c.network_cost,
                total_cost: c.total,
                net_power_kw: e.power[d].net_power,
                renewable_kw: e.power[d].renewable,
                sum_delay_hours: e.summed_delay(d),
                solver_iterations: e.diagnostics.iterations,
            });
        }
    }
    rows
}
