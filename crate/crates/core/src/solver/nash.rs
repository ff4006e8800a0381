//! Sampling check of the equilibrium condition: no player lowers its own
//! estimated cost by deviating alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scalar::Real;

use super::game::{strategy_feasible, EstimatorContext};
use super::AllocationMatrix;

/// Fractions of a player's rate moved by a perturbation, cycled over trials.
const SCALES: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

/// Largest relative cost decrease any player achieves over `trials` random
/// feasible deviations (others held fixed); 0 when none helps.
///
/// A deviation moves a random fraction of the rate at one data center to
/// another with spare room. Players are checked in parallel, each with its
/// own generator derived from `seed`.
pub fn nash_check<T: Real>(ctx: &EstimatorContext<T>, allocation: &AllocationMatrix<T>, trials: usize, seed: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let ar = &allocation.ar;
    (0..ctx.players())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let base = match ctx.player_cost(ar, i) {
                Ok(c) => c.as_f64(),
                Err(_) => return 0.0,
            };
            let n = ctx.data_centers();
            let gar = ctx.gar[i].as_f64();
            let mut best = 0.0f64;
            if n < 2 || gar <= 0.0 {
                return best;
            }
            let room: Vec<f64> = (0..n)
                .map(|d| ((T::one() - ctx.margin) * ctx.er_available(ar, i, d)).as_f64())
                .collect();
            for t in 0..trials {
                let from = rng.random_range(0..n);
                let to = (from + rng.random_range(1..n)) % n;
                let have = ar.get(i, from).as_f64();
                let spare = room[to] - ar.get(i, to).as_f64();
                let limit = have.min(spare);
                if limit <= 0.0 {
                    continue;
                }
                let amount = (SCALES[t % SCALES.len()] * gar * rng.random_range(0.5..1.0)).min(limit);
                let mut s: Vec<T> = ar.row(i).to_vec();
                s[from] = T::lit(have - amount).max(T::zero());
                s[to] += T::lit(amount);
                if !strategy_feasible(ctx, ar, i, &s) {
                    continue;
                }
                if let Ok(c) = ctx.player_cost_with(ar, i, &s) {
                    let gain = (base - c.as_f64()) / base.abs().max(f64::MIN_POSITIVE);
                    best = best.max(gain);
                }
            }
            best
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::PeakTracker;
    use crate::colocation::capacity_snapshot;
    use crate::scenario::{arrival_vector, synth};

    fn solved() -> (EstimatorContext<f64>, AllocationMatrix<f64>) {
        let s = synth::tiny();
        let snap = capacity_snapshot(&s, 12);
        let gar = arrival_vector(&s.workload, &s.task_types, 12);
        let ctx = EstimatorContext::from_scenario(&s, &snap, &gar, &PeakTracker::for_scenario(&s)).unwrap();
        let (a, d) = ctx.solve().unwrap();
        assert!(d.converged);
        (ctx, a)
    }

    #[test]
    fn converged_profile_passes() {
        let (ctx, a) = solved();
        assert!(nash_check(&ctx, &a, 100, 9) <= 1e-4);
    }

    #[test]
    fn shifted_profile_fails() {
        let (ctx, mut a) = solved();
        // Move 10% of player 0's rate to its costliest data center.
        let terms = ctx.reply_terms(&a.ar, 0);
        let worst = if terms[0].cf > terms[1].cf { 0 } else { 1 };
        let other = 1 - worst;
        let shift = (0.1 * ctx.gar[0]).min(a.ar.get(0, other));
        a.ar.set(0, other, a.ar.get(0, other) - shift);
        a.ar.set(0, worst, a.ar.get(0, worst) + shift);
        assert!(nash_check(&ctx, &a, 100, 9) > 0.0);
    }

    #[test]
    fn zero_trials_is_vacuous() {
        let (ctx, a) = solved();
        assert_eq!(nash_check(&ctx, &a, 0, 1), 0.0);
    }
}
