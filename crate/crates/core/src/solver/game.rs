//! The load-distribution game: task types are players, per-data-center rates
//! are strategies, and players take turns replying to each other.
//!
//! A player sees the other players only through each data center's
//! utilization `U = Σ_k AR_k / ER_k`. Its available rate is `ER · (1 − U_others)`,
//! and its power estimate is the estimator power of its own load on top of the
//! draw already committed at that data center (idle floor plus the others'
//! share of `pd_max`). The net-metering branch and the peak charge are then
//! evaluated on that data-center-level power, which makes both convex hinges in
//! the player's own rate.

use crate::accounting::{inventory_power, PeakTracker};
use crate::colocation::CapacitySnapshot;
use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::scalar::Real;
use crate::scenario::{renewable_power, ReplyMethod, ScenarioConfig};

use super::best_reply::{best_reply, MarginalCost, ReplyTerm};
use super::estimate::{self, MIN_AVAILABLE_RATE};
use super::{AllocationMatrix, SolveDiagnostics};

/// Per-data-center terms of the estimated cost model.
#[derive(Debug, Clone, PartialEq)]
pub struct DcEstimate<T> {
    pub pd_max: T,
    /// Net draw of the idle floor, kW.
    pub static_power: T,
    pub renewable: T,
    pub tou_price: T,
    pub alpha: T,
    pub peak_price: T,
    /// Billing-period peak before this epoch, kW.
    pub prior_peak: T,
}

/// Everything a player needs to price a strategy at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorContext<T> {
    pub dcs: Vec<DcEstimate<T>>,
    /// `nc_max[i][d]`.
    pub nc_max: RateMatrix<T>,
    pub er: RateMatrix<T>,
    pub gar: Vec<T>,
    pub player_ids: Vec<String>,
    pub beta: T,
    pub epoch_hours: T,
    pub margin: T,
    pub epsilon: T,
    pub max_iterations: usize,
    pub method: ReplyMethod,
    pub epoch: usize,
}

impl<T: Real> EstimatorContext<T> {
    /// Builds the context from a scenario, its capacity snapshot, this epoch's
    /// arrivals and the billing-period peak state.
    pub fn from_scenario(
        scenario: &ScenarioConfig,
        snapshot: &CapacitySnapshot<f64>,
        gar: &[f64],
        tracker: &PeakTracker<f64>,
    ) -> Result<Self> {
        let epoch = snapshot.epoch;
        let mut dcs = Vec::with_capacity(scenario.data_centers.len());
        for (d, dc) in scenario.data_centers.iter().enumerate() {
            let nodes: Vec<(T, T)> = dc
                .node_inventory
                .iter()
                .map(|(id, &n)| {
                    let nt = scenario.node_type(id).ok_or_else(|| Error::UnknownId {
                        kind: "node type",
                        id: id.clone(),
                    })?;
                    Ok((T::lit(f64::from(n)), T::lit(nt.avg_peak_dynamic_power)))
                })
                .collect::<Result<_>>()?;
            let (idle, _) = inventory_power(scenario, dc);
            dcs.push(DcEstimate {
                pd_max: estimate::pd_max(
                    T::lit(f64::from(dc.crac_count)),
                    T::lit(dc.crac_max_power),
                    &nodes,
                    T::lit(dc.power_efficiency),
                ),
                static_power: T::lit(idle * (1.0 + dc.cooling_factor) * dc.power_efficiency),
                renewable: T::lit(renewable_power(scenario, dc, epoch)?),
                tou_price: T::lit(dc.price_at(epoch)),
                alpha: T::lit(dc.net_metering_factor),
                peak_price: T::lit(tracker.peak_price[d]),
                prior_peak: T::lit(tracker.prior_peak[d]),
            });
        }
        let p = &scenario.solver;
        let mut nc_max = RateMatrix::zeros(scenario.task_types.len(), scenario.data_centers.len());
        for (i, t) in scenario.task_types.iter().enumerate() {
            for (d, dc) in scenario.data_centers.iter().enumerate() {
                nc_max.set(
                    i,
                    d,
                    estimate::nc_max(T::lit(p.network_price), T::lit(dc.node_count() as f64), T::lit(t.data_size)),
                );
            }
        }
        Ok(Self {
            dcs,
            nc_max,
            er: snapshot.er.map(T::lit),
            gar: gar.iter().map(|&g| T::lit(g)).collect(),
            player_ids: scenario.task_types.iter().map(|t| t.id.clone()).collect(),
            beta: T::lit(p.beta),
            epoch_hours: T::lit(p.epoch_hours),
            margin: T::lit(p.feasibility_margin),
            epsilon: T::lit(p.epsilon),
            max_iterations: p.max_iterations,
            method: p.reply_method,
            epoch,
        })
    }

    pub fn players(&self) -> usize {
        self.gar.len()
    }

    pub fn data_centers(&self) -> usize {
        self.dcs.len()
    }

    /// Utilization at `d` from every player except `skip`.
    pub fn utilization_except(&self, ar: &RateMatrix<T>, skip: Option<usize>, d: usize) -> T {
        (0..self.players())
            .filter(|&k| Some(k) != skip)
            .map(|k| ar.get(k, d) / self.er.get(k, d))
            .sum()
    }

    /// Rate left to player `i` at `d` by the other players.
    pub fn er_available(&self, ar: &RateMatrix<T>, i: usize, d: usize) -> T {
        let used = self.utilization_except(ar, Some(i), d) * self.er.get(i, d);
        estimate::available_rate(self.er.get(i, d), used).unwrap_or(T::zero())
    }

    /// Estimated net power at `d` under the full profile.
    pub fn dc_power(&self, ar: &RateMatrix<T>, d: usize) -> T {
        let c = &self.dcs[d];
        c.static_power + c.pd_max * self.utilization_except(ar, None, d) - c.renewable
    }

    /// Estimated peak charge increase at `d` under the full profile.
    pub fn peak_delta(&self, ar: &RateMatrix<T>, d: usize) -> T {
        let c = &self.dcs[d];
        c.peak_price * (self.dc_power(ar, d) - c.prior_peak).max(T::zero())
    }

    /// Capacity factor of `d` for player `i`; `None` when nothing is left.
    pub fn capacity_factor(&self, ar: &RateMatrix<T>, i: usize, d: usize) -> Option<T> {
        let c = &self.dcs[d];
        let er_av = self.er_available(ar, i, d);
        estimate::capacity_factor(
            c.tou_price * self.epoch_hours,
            c.pd_max,
            c.renewable,
            self.peak_delta(ar, d),
            self.nc_max.get(i, d),
            er_av,
        )
        .ok()
    }

    /// Reply problem of player `i` against the current profile.
    pub fn reply_terms(&self, ar: &RateMatrix<T>, i: usize) -> Vec<ReplyTerm<T>> {
        (0..self.data_centers())
            .map(|d| {
                let c = &self.dcs[d];
                let er = self.er.get(i, d);
                let er_av = self.er_available(ar, i, d);
                let base = (c.static_power + c.pd_max * self.utilization_except(ar, Some(i), d)) - c.renewable;
                let k_energy = c.tou_price * self.epoch_hours * c.pd_max / er;
                let k_peak = c.peak_price * c.pd_max / er;
                let k_net = self.nc_max.get(i, d) / er;
                // Rates at which the data center starts drawing from the grid,
                // and at which it sets a new billing-period peak.
                let x_grid = -base * er / c.pd_max;
                let x_peak = (c.prior_peak - base) * er / c.pd_max;
                let marginal = MarginalCost::constant(c.alpha * k_energy + k_net)
                    .with_step(x_grid, (T::one() - c.alpha) * k_energy)
                    .with_step(x_peak, k_peak);
                ReplyTerm {
                    er_av,
                    cf: self.capacity_factor(ar, i, d).unwrap_or(T::infinity()),
                    marginal,
                }
            })
            .collect()
    }

    /// Estimated overall cost of player `i` playing `strategy` while the
    /// others keep their rows of `ar`.
    pub fn player_cost_with(&self, ar: &RateMatrix<T>, i: usize, strategy: &[T]) -> Result<T> {
        let mut per_dc = Vec::with_capacity(self.data_centers());
        for (d, &x) in strategy.iter().enumerate() {
            let c = &self.dcs[d];
            let er = self.er.get(i, d);
            let others = self.utilization_except(ar, Some(i), d);
            let er_av = self.er_available(ar, i, d);
            let power =
                c.static_power + c.pd_max * others + estimate::estimated_power(c.pd_max, x, er, c.renewable)?;
            let peak = c.peak_price * (power - c.prior_peak).max(T::zero());
            let network = estimate::estimated_network_cost(self.nc_max.get(i, d), x, er)?;
            let dc_cost = estimate::estimated_dc_cost(c.tou_price, c.alpha, power, peak, network, self.epoch_hours);
            let delay = if x == T::zero() {
                T::zero()
            } else {
                estimate::estimated_delay_cost(x, er_av, self.beta)?
            };
            per_dc.push((dc_cost, delay));
        }
        Ok(estimate::overall_cost(per_dc))
    }

    /// Estimated overall cost of player `i` under the profile `ar`.
    pub fn player_cost(&self, ar: &RateMatrix<T>, i: usize) -> Result<T> {
        self.player_cost_with(ar, i, ar.row(i))
    }

    /// `Σ_i OC_i`.
    pub fn total_cost(&self, ar: &RateMatrix<T>) -> Result<T> {
        (0..self.players()).map(|i| self.player_cost(ar, i)).sum()
    }

    /// Best-reply dynamics from the all-zero profile, players updating in
    /// turn, until the summed change in player cost drops below `epsilon`.
    pub fn solve(&self) -> Result<(AllocationMatrix<T>, SolveDiagnostics)> {
        let n = self.players();
        let mut ar = RateMatrix::zeros(n, self.data_centers());
        let mut cost = vec![T::zero(); n];
        let mut diag = SolveDiagnostics::default();
        while diag.iterations < self.max_iterations {
            diag.iterations += 1;
            let mut norm = T::zero();
            for i in 0..n {
                let terms = self.reply_terms(&ar, i);
                let reply = best_reply(self.method, &self.player_ids[i], self.gar[i], &terms, self.beta, self.margin)?;
                diag.projections_applied += reply.projections;
                ar.row_mut(i).copy_from_slice(&reply.ar);
                let oc = self.player_cost(&ar, i)?;
                norm += (cost[i] - oc).abs();
                cost[i] = oc;
            }
            diag.norm_history.push(norm.as_f64());
            if norm < self.epsilon {
                diag.converged = true;
                break;
            }
        }
        Ok((
            AllocationMatrix {
                ar,
                epoch: self.epoch,
            },
            diag,
        ))
    }
}

/// Whether `s` is an admissible strategy for player `i` against the other
/// rows of `ar`: nonnegative and within the margin of the available rate.
pub(crate) fn strategy_feasible<T: Real>(ctx: &EstimatorContext<T>, ar: &RateMatrix<T>, i: usize, s: &[T]) -> bool {
    s.iter().enumerate().all(|(d, &x)| {
        let av = ctx.er_available(ar, i, d);
        x >= T::zero() && (x == T::zero() || (av > T::lit(MIN_AVAILABLE_RATE) && x <= (T::one() - ctx.margin) * av))
    })
}

/// Solves one epoch of a scenario with the full cost model.
pub fn nild_solve(
    scenario: &ScenarioConfig,
    snapshot: &CapacitySnapshot<f64>,
    gar: &[f64],
    tracker: &PeakTracker<f64>,
) -> Result<(AllocationMatrix<f64>, SolveDiagnostics)> {
    EstimatorContext::<f64>::from_scenario(scenario, snapshot, gar, tracker)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colocation::capacity_snapshot;
    use crate::scenario::{arrival_vector, synth};

    fn tiny_ctx(epoch: usize) -> EstimatorContext<f64> {
        let s = synth::tiny();
        let snap = capacity_snapshot(&s, epoch);
        let gar = arrival_vector(&s.workload, &s.task_types, epoch);
        EstimatorContext::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap()
    }

    #[test]
    fn zero_strategy_costs_only_the_shared_terms() {
        let ctx = tiny_ctx(3);
        let ar = RateMatrix::zeros(2, 2);
        let c = ctx.player_cost(&ar, 0).unwrap();
        let expect: f64 = (0..2)
            .map(|d| {
                let p = ctx.dc_power(&ar, d);
                let m = if p >= 0.0 { 1.0 } else { ctx.dcs[d].alpha };
                ctx.dcs[d].tou_price * m * p + ctx.peak_delta(&ar, d)
            })
            .sum();
        assert!((c - expect).abs() < 1e-12);
    }

    #[test]
    fn marginal_model_matches_cost_slope() {
        let ctx = tiny_ctx(13);
        let (alloc, _) = ctx.solve().unwrap();
        let ar = alloc.ar;
        for i in 0..2 {
            let terms = ctx.reply_terms(&ar, i);
            for d in 0..2 {
                let x = ar.get(i, d) * 0.7 + 0.01;
                let h = 1e-6;
                let mut lo = ar.row(i).to_vec();
                let mut hi = lo.clone();
                lo[d] = x;
                hi[d] = x + h;
                let fd = (ctx.player_cost_with(&ar, i, &hi).unwrap() - ctx.player_cost_with(&ar, i, &lo).unwrap()) / h;
                let e = terms[d].er_av;
                let model = terms[d].marginal.right_slope(x) + ctx.beta * e / ((e - x) * (e - x));
                assert!((fd - model).abs() < 1e-4 * (1.0 + model.abs()), "{fd} vs {model}");
            }
        }
    }

    #[test]
    fn single_player_settles_after_opening_pass() {
        let mut s = synth::tiny();
        s.task_types.truncate(1);
        for nt in &mut s.node_types {
            nt.base_exec_rate.retain(|k, _| k == &s.task_types[0].id);
        }
        s.workload.base_rate.retain(|k, _| k == &s.task_types[0].id);
        let snap = capacity_snapshot(&s, 5);
        let gar = arrival_vector(&s.workload, &s.task_types, 5);
        let ctx = EstimatorContext::<f64>::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        let (alloc, diag) = ctx.solve().unwrap();
        assert!(diag.converged);
        assert_eq!(diag.iterations, 2);
        assert_eq!(diag.norm_history[1], 0.0);
        let zero = RateMatrix::zeros(1, 2);
        let once = best_reply(ctx.method, "p", gar[0], &ctx.reply_terms(&zero, 0), ctx.beta, ctx.margin).unwrap();
        assert_eq!(alloc.ar.row(0), once.ar.as_slice());
    }

    #[test]
    fn identical_players_on_symmetric_dcs() {
        let mut s = synth::tiny();
        let dc0 = s.data_centers[0].clone();
        s.data_centers[1] = crate::scenario::DataCenterSpec {
            id: "twin".into(),
            ..dc0
        };
        let t0 = s.task_types[0].clone();
        s.task_types[1] = crate::scenario::TaskTypeSpec {
            id: "twin_task".into(),
            ..t0.clone()
        };
        for nt in &mut s.node_types {
            let r = nt.base_exec_rate[&t0.id];
            nt.base_exec_rate.insert("twin_task".into(), r);
            nt.base_exec_rate.retain(|k, _| k == &t0.id || k == "twin_task");
        }
        let b = s.workload.base_rate[&t0.id];
        s.workload.base_rate = [(t0.id.clone(), b), ("twin_task".to_string(), b)].into();
        s.validate_structure().unwrap();
        let snap = capacity_snapshot(&s, 0);
        let gar = arrival_vector(&s.workload, &s.task_types, 0);
        let (alloc, diag) = nild_solve(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        assert!(diag.converged);
        for i in 0..2 {
            for d in 0..2 {
                assert!((alloc.ar.get(i, d) - gar[i] / 2.0).abs() < 1e-3 * gar[i], "{:?}", alloc.ar);
            }
        }
    }

    #[test]
    fn solve_is_deterministic_and_conserving() {
        let ctx = tiny_ctx(17);
        let (a, d1) = ctx.solve().unwrap();
        let (b, d2) = ctx.solve().unwrap();
        assert_eq!(a, b);
        assert_eq!(d1, d2);
        let snap = capacity_snapshot(&synth::tiny(), 17);
        a.check(&snap.er, &ctx.gar, ctx.margin).unwrap();
    }

    #[test]
    fn f32_context_solves() {
        let s = synth::tiny();
        let snap = capacity_snapshot(&s, 10);
        let gar = arrival_vector(&s.workload, &s.task_types, 10);
        let ctx = EstimatorContext::<f32>::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        let (alloc, _) = ctx.solve().unwrap();
        for i in 0..2 {
            let sum: f32 = alloc.ar.row(i).iter().sum();
            assert!((sum - gar[i] as f32).abs() < 1e-3 * gar[i] as f32);
        }
    }
}
