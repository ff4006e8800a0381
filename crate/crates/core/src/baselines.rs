//! Comparison solvers and the exhaustive grid oracle.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::PeakTracker;
use crate::colocation::{uncontended_snapshot, CapacitySnapshot};
use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::scalar::Real;
use crate::scenario::ScenarioConfig;
use crate::solver::best_reply::{project, ReplyTerm};
use crate::solver::estimate::MIN_AVAILABLE_RATE;
use crate::solver::game::{strategy_feasible, EstimatorContext};
use crate::solver::{AllocationMatrix, SolveDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Nild,
    NsldSimplified,
    GreedyCf,
    Uniform,
    Oracle,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::Nild,
        SolverKind::NsldSimplified,
        SolverKind::GreedyCf,
        SolverKind::Uniform,
        SolverKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Nild => "nild",
            SolverKind::NsldSimplified => "nsld_simplified",
            SolverKind::GreedyCf => "greedy_cf",
            SolverKind::Uniform => "uniform",
            SolverKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "nsld" && *k == SolverKind::NsldSimplified) || (s == "greedy" && *k == SolverKind::GreedyCf))
            .ok_or_else(|| {
                format!(
                    "unknown solver `{s}` (expected one of {})",
                    Self::ALL.map(SolverKind::name).join(", ")
                )
            })
    }
}

/// Largest oracle instance accepted.
pub const ORACLE_MAX_DCS: usize = 3;
pub const ORACLE_MAX_TASKS: usize = 2;
pub const ORACLE_MAX_STEPS: usize = 500;
/// Cap on joint grid points evaluated by one oracle call.
pub const ORACLE_MAX_POINTS: u128 = 50_000_000;

/// Solves one epoch with the chosen solver; every result satisfies the
/// allocation invariants against `snapshot`.
pub fn solve_with(
    kind: SolverKind,
    scenario: &ScenarioConfig,
    snapshot: &CapacitySnapshot<f64>,
    gar: &[f64],
    tracker: &PeakTracker<f64>,
) -> Result<(AllocationMatrix<f64>, SolveDiagnostics)> {
    let ctx = EstimatorContext::<f64>::from_scenario(scenario, snapshot, gar, tracker)?;
    let out = match kind {
        SolverKind::Nild => ctx.solve()?,
        SolverKind::NsldSimplified => nsld_simplified_solve(scenario, snapshot, gar, tracker)?,
        SolverKind::GreedyCf => (greedy_cf_solve(&ctx)?, SolveDiagnostics::once()),
        SolverKind::Uniform => (uniform_solve(snapshot, gar), SolveDiagnostics::once()),
        SolverKind::Oracle => {
            let (a, _) = oracle_solve(&ctx, scenario.solver.oracle_grid_steps)?;
            (a, SolveDiagnostics::once())
        }
    };
    out.0.check(&snapshot.er, gar, scenario.solver.feasibility_margin)?;
    Ok(out)
}

impl SolveDiagnostics {
    /// Diagnostics of a one-shot (non-iterative) solver.
    pub fn once() -> Self {
        Self {
            iterations: 1,
            norm_history: Vec::new(),
            converged: true,
            projections_applied: 0,
        }
    }
}

/// The estimator with net metering, peak charges, renewables, network
/// transfer and co-location interference all dropped.
pub fn simplified_context(
    scenario: &ScenarioConfig,
    snapshot: &CapacitySnapshot<f64>,
    gar: &[f64],
    tracker: &PeakTracker<f64>,
) -> Result<EstimatorContext<f64>> {
    let uncontended = uncontended_snapshot(scenario, snapshot.epoch);
    let mut ctx = EstimatorContext::from_scenario(scenario, &uncontended, gar, tracker)?;
    for c in &mut ctx.dcs {
        c.renewable = 0.0;
        c.peak_price = 0.0;
        c.prior_peak = 0.0;
        c.alpha = 1.0;
    }
    ctx.nc_max = ctx.nc_max.map(|_| 0.0);
    Ok(ctx)
}

/// The same reply dynamics on the simplified model, then fitted to the real
/// (contended) capacity.
pub fn nsld_simplified_solve(
    scenario: &ScenarioConfig,
    snapshot: &CapacitySnapshot<f64>,
    gar: &[f64],
    tracker: &PeakTracker<f64>,
) -> Result<(AllocationMatrix<f64>, SolveDiagnostics)> {
    let ctx = simplified_context(scenario, snapshot, gar, tracker)?;
    let (alloc, mut diag) = ctx.solve()?;
    let (ar, moved) = fit_to_capacity(
        &alloc.ar,
        &snapshot.er,
        gar,
        scenario.solver.feasibility_margin,
        &ctx.player_ids,
    )?;
    diag.projections_applied += moved;
    Ok((
        AllocationMatrix {
            ar,
            epoch: snapshot.epoch,
        },
        diag,
    ))
}

/// Places each player's desired rates in turn against the real capacity left
/// by the players placed before it, moving any excess onto the remaining
/// headroom. Returns the fitted matrix and the number of clamped rates.
pub fn fit_to_capacity<T: Real>(
    desired: &RateMatrix<T>,
    er: &RateMatrix<T>,
    gar: &[T],
    margin: T,
    players: &[String],
) -> Result<(RateMatrix<T>, usize)> {
    let (n, m) = (desired.rows(), desired.cols());
    let mut out = RateMatrix::zeros(n, m);
    let mut used = vec![T::zero(); m];
    let mut moved = 0;
    for i in 0..n {
        let terms: Vec<ReplyTerm<T>> = (0..m)
            .map(|d| ReplyTerm::linear(er.get(i, d) * (T::one() - used[d]).max(T::zero()), T::zero()))
            .collect();
        let usable: T = terms.iter().map(|t| (T::one() - margin) * t.er_av).sum();
        if usable < gar[i] {
            return Err(Error::InsufficientCapacity {
                player: players[i].clone(),
                demand: gar[i].as_f64(),
                available: usable.as_f64(),
            });
        }
        let mut row = desired.row(i).to_vec();
        moved += project(&mut row, gar[i], &terms, margin);
        for d in 0..m {
            used[d] += row[d] / er.get(i, d);
        }
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok((out, moved))
}

/// Cheapest-first fill: data centers in ascending capacity factor (ties by
/// index), each taking up to `(1 − margin)·er_av` until `gar` is placed.
pub fn greedy_fill<T: Real>(player: &str, gar: T, er_av: &[T], cf: &[T], margin: T) -> Result<Vec<T>> {
    let mut order: Vec<usize> = (0..er_av.len())
        .filter(|&d| er_av[d] > T::lit(MIN_AVAILABLE_RATE) && cf[d].is_finite())
        .collect();
    order.sort_by(|&a, &b| cf[a].partial_cmp(&cf[b]).expect("finite CF").then(a.cmp(&b)));
    let mut out = vec![T::zero(); er_av.len()];
    let mut left = gar;
    for d in order {
        if left <= T::zero() {
            break;
        }
        let take = left.min((T::one() - margin) * er_av[d]);
        out[d] = take;
        left -= take;
    }
    if left > T::lit(1e-9) * gar.max(T::one()) {
        return Err(Error::InsufficientCapacity {
            player: player.to_string(),
            demand: gar.as_f64(),
            available: (gar - left).as_f64(),
        });
    }
    Ok(out)
}

/// One greedy pass over the players in order, each against the capacity
/// factors induced by the players already placed.
pub fn greedy_cf_solve<T: Real>(ctx: &EstimatorContext<T>) -> Result<AllocationMatrix<T>> {
    let mut ar = RateMatrix::zeros(ctx.players(), ctx.data_centers());
    for i in 0..ctx.players() {
        let terms = ctx.reply_terms(&ar, i);
        let er_av: Vec<T> = terms.iter().map(|t| t.er_av).collect();
        let cf: Vec<T> = terms.iter().map(|t| t.cf).collect();
        let row = greedy_fill(&ctx.player_ids[i], ctx.gar[i], &er_av, &cf, ctx.margin)?;
        ar.row_mut(i).copy_from_slice(&row);
    }
    Ok(AllocationMatrix { ar, epoch: ctx.epoch })
}

/// Capacity-proportional split `GAR_i · ER_{i,d} / Σ_d ER_{i,d}`.
pub fn uniform_solve<T: Real>(snapshot: &CapacitySnapshot<T>, gar: &[T]) -> AllocationMatrix<T> {
    let er = &snapshot.er;
    let mut ar = RateMatrix::zeros(er.rows(), er.cols());
    for (i, &g) in gar.iter().enumerate() {
        let total = er.row_sum(i);
        for d in 0..er.cols() {
            ar.set(i, d, g * er.get(i, d) / total);
        }
    }
    AllocationMatrix {
        ar,
        epoch: snapshot.epoch,
    }
}

/// All ways of writing `steps` as an ordered sum of `parts` nonnegative
/// integers, in lexicographic order.
fn compositions(steps: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(left - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(steps, parts, &mut Vec::new(), &mut out);
    }
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k.min(n - k)).fold(1u128, |acc, j| acc * (n - j) / (j + 1))
}

/// `Σ_i OC_i`, or +∞ when some player's strategy is inadmissible.
fn joint_cost<T: Real>(ctx: &EstimatorContext<T>, ar: &RateMatrix<T>) -> f64 {
    let mut total = 0.0;
    for i in 0..ctx.players() {
        if !strategy_feasible(ctx, ar, i, ar.row(i)) {
            return f64::INFINITY;
        }
        match ctx.player_cost(ar, i) {
            Ok(c) if c.is_finite() => total += c.as_f64(),
            _ => return f64::INFINITY,
        }
    }
    total
}

/// Exhaustive search over every player's discretized simplex with step
/// `GAR_i / grid_steps`. Returns the best grid point and its summed
/// estimated cost.
pub fn oracle_grid<T: Real>(ctx: &EstimatorContext<T>, grid_steps: usize) -> Result<(AllocationMatrix<T>, f64)> {
    let (n, m) = (ctx.players(), ctx.data_centers());
    if m > ORACLE_MAX_DCS || n > ORACLE_MAX_TASKS || grid_steps > ORACLE_MAX_STEPS || grid_steps == 0 {
        return Err(Error::SizeCap(format!(
            "oracle handles at most {ORACLE_MAX_DCS} data centers, {ORACLE_MAX_TASKS} task types and \
             {ORACLE_MAX_STEPS} grid steps (got {m}, {n}, {grid_steps})"
        )));
    }
    let per_player = binomial((grid_steps + m - 1) as u128, (m - 1) as u128);
    let points = per_player.pow(n as u32);
    if points > ORACLE_MAX_POINTS {
        return Err(Error::SizeCap(format!(
            "{points} joint grid points exceed the limit of {ORACLE_MAX_POINTS}"
        )));
    }
    let grid = compositions(grid_steps, m);
    let step: Vec<T> = ctx.gar.iter().map(|&g| g / T::lit(grid_steps as f64)).collect();
    let to_row = |i: usize, c: &[usize]| -> Vec<T> { c.iter().map(|&k| step[i] * T::lit(k as f64)).collect() };

    // Joint index in mixed radix over the per-player grids.
    let total = grid.len().pow(n as u32);
    let fill = |mut idx: usize, ar: &mut RateMatrix<T>| {
        for i in (0..n).rev() {
            let c = &grid[idx % grid.len()];
            idx /= grid.len();
            ar.row_mut(i).copy_from_slice(&to_row(i, c));
        }
    };
    let best = (0..total)
        .into_par_iter()
        .map_init(
            || RateMatrix::zeros(n, m),
            |ar, idx| {
                fill(idx, ar);
                (joint_cost(ctx, ar), idx)
            },
        )
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    if !best.0.is_finite() {
        return Err(Error::InsufficientCapacity {
            player: ctx.player_ids.join(","),
            demand: ctx.gar.iter().map(|g| g.as_f64()).sum(),
            available: 0.0,
        });
    }
    let mut ar = RateMatrix::zeros(n, m);
    fill(best.1, &mut ar);
    Ok((AllocationMatrix { ar, epoch: ctx.epoch }, best.0))
}

/// [`oracle_grid`] followed by one pass at half the step around the best
/// point.
pub fn oracle_solve<T: Real>(ctx: &EstimatorContext<T>, grid_steps: usize) -> Result<(AllocationMatrix<T>, f64)> {
    let (coarse, mut best_cost) = oracle_grid(ctx, grid_steps)?;
    let (n, m) = (ctx.players(), ctx.data_centers());
    let step: Vec<T> = ctx.gar.iter().map(|&g| g / T::lit(grid_steps as f64)).collect();

    // Half-step pass: move mass between each pair of data centers, one
    // player at a time.
    let mut improved = coarse.ar;
    for i in 0..n {
        let h = step[i] / T::lit(2.0);
        for from in 0..m {
            for to in 0..m {
                if from == to || improved.get(i, from) < h {
                    continue;
                }
                let mut cand = improved.clone();
                cand.set(i, from, cand.get(i, from) - h);
                cand.set(i, to, cand.get(i, to) + h);
                let c = joint_cost(ctx, &cand);
                if c < best_cost {
                    best_cost = c;
                    improved = cand;
                }
            }
        }
    }
    Ok((
        AllocationMatrix {
            ar: improved,
            epoch: ctx.epoch,
        },
        best_cost,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colocation::capacity_snapshot;
    use crate::scenario::{arrival_vector, synth};

    fn tiny_ctx(epoch: usize) -> (ScenarioConfig, CapacitySnapshot<f64>, Vec<f64>, EstimatorContext<f64>) {
        let s = synth::tiny();
        let snap = capacity_snapshot(&s, epoch);
        let gar = arrival_vector(&s.workload, &s.task_types, epoch);
        let ctx = EstimatorContext::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        (s, snap, gar, ctx)
    }

    #[test]
    fn greedy_fill_examples() {
        assert_eq!(greedy_fill("p", 6.0, &[10.0, 10.0], &[1.0, 2.0], 0.0).unwrap(), vec![6.0, 0.0]);
        assert_eq!(greedy_fill("p", 14.0, &[10.0, 10.0], &[1.0, 2.0], 0.0).unwrap(), vec![10.0, 4.0]);
        assert_eq!(greedy_fill("p", 14.0, &[10.0, 10.0], &[1.0, 1.0], 0.0).unwrap(), vec![10.0, 4.0]);
        assert!(greedy_fill("p", 21.0, &[10.0, 10.0], &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn uniform_examples() {
        let snap = |er: Vec<f64>| CapacitySnapshot {
            er: RateMatrix::from_rows(vec![er]),
            epoch: 0,
        };
        assert_eq!(uniform_solve(&snap(vec![10.0, 10.0]), &[6.0]).ar.row(0), &[3.0, 3.0]);
        assert_eq!(uniform_solve(&snap(vec![20.0, 10.0]), &[6.0]).ar.row(0), &[4.0, 2.0]);
        assert_eq!(uniform_solve(&snap(vec![20.0]), &[6.0]).ar.row(0), &[6.0]);
    }

    #[test]
    fn solver_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
        assert!("fdld".parse::<SolverKind>().is_err());
    }

    #[test]
    fn nsld_coincides_without_extras() {
        let s = synth::no_extras();
        for epoch in [0, 9, 14] {
            let snap = capacity_snapshot(&s, epoch);
            let gar = arrival_vector(&s.workload, &s.task_types, epoch);
            let t = PeakTracker::for_scenario(&s);
            let a = solve_with(SolverKind::Nild, &s, &snap, &gar, &t).unwrap();
            let b = solve_with(SolverKind::NsldSimplified, &s, &snap, &gar, &t).unwrap();
            assert_eq!(a.0, b.0);
        }
    }

    #[test]
    fn oracle_grid_of_one_puts_mass_on_single_dcs() {
        let (_, _, _, ctx) = tiny_ctx(2);
        let (a, _) = oracle_grid(&ctx, 1).unwrap();
        for i in 0..2 {
            let nonzero: Vec<f64> = a.ar.row(i).iter().copied().filter(|&x| x > 0.0).collect();
            assert_eq!(nonzero, vec![ctx.gar[i]]);
        }
    }

    #[test]
    fn oracle_is_no_worse_than_other_solvers() {
        let (s, snap, gar, ctx) = tiny_ctx(12);
        let (_, best) = oracle_solve(&ctx, 200).unwrap();
        for k in [SolverKind::Nild, SolverKind::GreedyCf, SolverKind::Uniform] {
            let (a, _) = solve_with(k, &s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
            let c = ctx.total_cost(&a.ar).unwrap();
            assert!(best <= c * (1.0 + 1e-3), "{k}: oracle {best} vs {c}");
        }
    }

    #[test]
    fn oracle_size_cap() {
        let s = synth::geo_config(4);
        let snap = capacity_snapshot(&s, 0);
        let gar = arrival_vector(&s.workload, &s.task_types, 0);
        let ctx = EstimatorContext::<f64>::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        assert!(matches!(oracle_solve(&ctx, 10), Err(Error::SizeCap(_))));
        let (_, _, _, tiny) = tiny_ctx(0);
        assert!(matches!(oracle_solve(&tiny, 501), Err(Error::SizeCap(_))));
    }

    #[test]
    fn all_solvers_feasible_on_tiny() {
        let s = synth::tiny();
        for epoch in 0..24 {
            let snap = capacity_snapshot(&s, epoch);
            let gar = arrival_vector(&s.workload, &s.task_types, epoch);
            for k in SolverKind::ALL {
                let t = PeakTracker::for_scenario(&s);
                solve_with(k, &s, &snap, &gar, &t).unwrap_or_else(|e| panic!("{k} at {epoch}: {e}"));
            }
        }
    }
}
