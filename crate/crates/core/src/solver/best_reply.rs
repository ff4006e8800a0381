//! Best reply of one player: water-filling over data centers sorted by
//! capacity factor.
//!
//! [`closed_form_reply`] is the sort / prune / closed-form split. Its
//! multiplier is pinned to the marginal data center and the split is rescaled
//! by `γ/δ`, which conserves the arrival rate but only minimizes the player's
//! cost when a single data center stays active or the active ones are
//! symmetric. [`refined_reply`] keeps that as the starting point and then
//! solves the multiplier exactly against the player's true marginal costs.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::ReplyMethod;

use super::estimate::MIN_AVAILABLE_RATE;

/// Nondecreasing piecewise-constant marginal cost: `base` from zero, plus
/// each `(breakpoint, increment)` once the rate passes the breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCost<T> {
    pub base: T,
    pub steps: Vec<(T, T)>,
}

impl<T: Real> MarginalCost<T> {
    pub fn constant(slope: T) -> Self {
        Self {
            base: slope,
            steps: Vec::new(),
        }
    }

    /// Adds a slope `increment` beyond `at`; breakpoints at or below zero fold
    /// into the base, zero increments are dropped.
    pub fn with_step(mut self, at: T, increment: T) -> Self {
        if increment == T::zero() {
            return self;
        }
        if at <= T::zero() {
            self.base += increment;
        } else {
            let pos = self.steps.partition_point(|&(b, _)| b <= at);
            self.steps.insert(pos, (at, increment));
        }
        self
    }

    /// Slope just to the right of `x`.
    pub fn right_slope(&self, x: T) -> T {
        self.base
            + self
                .steps
                .iter()
                .filter(|&&(b, _)| b <= x)
                .map(|&(_, s)| s)
                .sum::<T>()
    }
}

/// One data center as seen by the replying player.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplyTerm<T> {
    /// Rate left over by the other players.
    pub er_av: T,
    /// Capacity factor, which orders data centers from cheapest to costliest.
    pub cf: T,
    /// Marginal cost of the non-delay terms.
    pub marginal: MarginalCost<T>,
}

impl<T: Real> ReplyTerm<T> {
    /// A term whose per-unit cost is its capacity factor.
    pub fn linear(er_av: T, cf: T) -> Self {
        Self {
            er_av,
            cf,
            marginal: MarginalCost::constant(cf),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply<T> {
    /// Rate assigned to each data center, in input order.
    pub ar: Vec<T>,
    /// Data centers kept by the pruning loop.
    pub active: usize,
    /// Multiplier the final split corresponds to.
    pub lambda: T,
    /// Coordinates moved by the safety projection.
    pub projections: usize,
}

fn check_capacity<T: Real>(player: &str, gar: T, terms: &[ReplyTerm<T>], margin: T) -> Result<()> {
    let usable: T = terms
        .iter()
        .filter(|t| t.er_av > T::lit(MIN_AVAILABLE_RATE))
        .map(|t| (T::one() - margin) * t.er_av)
        .sum();
    if usable < gar {
        return Err(Error::InsufficientCapacity {
            player: player.to_string(),
            demand: gar.as_f64(),
            available: usable.as_f64(),
        });
    }
    Ok(())
}

/// Candidate indices sorted by capacity factor, ties by index.
fn sorted_candidates<T: Real>(terms: &[ReplyTerm<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..terms.len())
        .filter(|&d| terms[d].er_av > T::lit(MIN_AVAILABLE_RATE))
        .collect();
    idx.sort_by(|&a, &b| terms[a].cf.partial_cmp(&terms[b].cf).expect("finite CF").then(a.cmp(&b)));
    idx
}

fn root_term<T: Real>(beta: T, er_av: T, lambda: T, cf: T) -> T {
    (beta * er_av / (lambda - cf)).sqrt()
}

/// Sort / prune / closed-form split, then the safety projection.
pub fn closed_form_reply<T: Real>(
    player: &str,
    gar: T,
    terms: &[ReplyTerm<T>],
    beta: T,
    margin: T,
) -> Result<Reply<T>> {
    check_capacity(player, gar, terms, margin)?;
    let n = terms.len();
    let mut ar = vec![T::zero(); n];
    if gar <= T::zero() {
        return Ok(Reply {
            ar,
            active: 0,
            lambda: T::zero(),
            projections: 0,
        });
    }
    let order = sorted_candidates(terms);
    let er = |k: usize| terms[order[k]].er_av;
    let cf = |k: usize| terms[order[k]].cf;

    let lambda_at = |q: usize| super::estimate::lagrangian(cf(q - 1), er(q - 1), beta);
    let delta_at = |q: usize, lambda: T| (0..q).map(|k| root_term(beta, er(k), lambda, cf(k))).sum::<T>();

    let mut q = order.len();
    let mut gamma: T = (0..q).map(er).sum::<T>() - gar;
    let mut lambda = lambda_at(q);
    let mut delta = delta_at(q, lambda);
    while gamma > delta && q > 1 {
        let next = gamma - er(q - 1);
        if next < T::zero() {
            // Dropping the marginal data center would leave too little capacity.
            break;
        }
        gamma = next;
        q -= 1;
        lambda = lambda_at(q);
        delta = delta_at(q, lambda);
    }
    let scale = gamma / delta;
    for k in 0..q {
        ar[order[k]] = er(k) - scale * root_term(beta, er(k), lambda, cf(k));
    }
    let projections = project(&mut ar, gar, terms, margin);
    Ok(Reply {
        ar,
        active: q,
        lambda,
        projections,
    })
}

/// Rate minimizing `f(x) − λx` on `[0, cap]`, where `f'` is the marginal
/// cost plus the delay marginal `β·er/(er − x)²`.
fn rate_at<T: Real>(term: &ReplyTerm<T>, cap: T, beta: T, lambda: T) -> T {
    let e = term.er_av;
    let delay_slope = |x: T| beta * e / ((e - x) * (e - x));
    let mut start = T::zero();
    let mut slope = term.marginal.base;
    let mut steps = term.marginal.steps.iter().peekable();
    loop {
        let end = match steps.peek() {
            Some(&&(b, _)) if b < cap => b,
            _ => cap,
        };
        if lambda <= slope + delay_slope(start) {
            return start;
        }
        let x = e - (beta * e / (lambda - slope)).sqrt();
        if x < end {
            return x.max(start);
        }
        if end >= cap {
            return cap;
        }
        let (_, inc) = *steps.next().expect("peeked");
        start = end;
        slope += inc;
    }
}

/// Exact best reply: the closed-form split supplies the starting multiplier,
/// then `λ` is bisected until the water-filling rates conserve `gar`.
pub fn refined_reply<T: Real>(
    player: &str,
    gar: T,
    terms: &[ReplyTerm<T>],
    beta: T,
    margin: T,
) -> Result<Reply<T>> {
    let seed = closed_form_reply(player, gar, terms, beta, margin)?;
    if gar <= T::zero() {
        return Ok(seed);
    }
    let n = terms.len();
    let live: Vec<bool> = terms.iter().map(|t| t.er_av > T::lit(MIN_AVAILABLE_RATE)).collect();
    let caps: Vec<T> = terms.iter().map(|t| (T::one() - margin) * t.er_av).collect();
    let total = |lambda: T, out: &mut [T]| -> T {
        let mut s = T::zero();
        for d in 0..n {
            out[d] = if live[d] {
                rate_at(&terms[d], caps[d], beta, lambda)
            } else {
                T::zero()
            };
            s += out[d];
        }
        s
    };

    let mut buf = vec![T::zero(); n];
    let two = T::lit(2.0);
    let scale_of = |l: T| l.abs().max(T::one());

    // Bracket around the closed-form multiplier.
    let mut lo = seed.lambda;
    let mut hi = seed.lambda;
    let mut step = scale_of(seed.lambda) * T::lit(1e-3);
    while total(lo, &mut buf) > gar {
        lo -= step;
        step = step * two;
    }
    step = scale_of(seed.lambda) * T::lit(1e-3);
    let mut guard = 0;
    while total(hi, &mut buf) < gar {
        hi += step;
        step = step * two;
        guard += 1;
        if guard > 2000 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid, &mut buf) < gar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut ar = vec![T::zero(); n];
    total(hi, &mut ar);
    let projections = project(&mut ar, gar, terms, margin);
    Ok(Reply {
        ar,
        active: seed.active,
        lambda: hi,
        projections,
    })
}

/// Best reply using the requested method.
pub fn best_reply<T: Real>(
    method: ReplyMethod,
    player: &str,
    gar: T,
    terms: &[ReplyTerm<T>],
    beta: T,
    margin: T,
) -> Result<Reply<T>> {
    match method {
        ReplyMethod::ClosedForm => closed_form_reply(player, gar, terms, beta, margin),
        ReplyMethod::Refined => refined_reply(player, gar, terms, beta, margin),
    }
}

/// Clamps each rate into `[0, (1 − margin)·er_av]` and spreads the remaining
/// mismatch with `gar` over the headroom (or the mass) of the other data
/// centers. Returns how many rates were clamped.
pub fn project<T: Real>(ar: &mut [T], gar: T, terms: &[ReplyTerm<T>], margin: T) -> usize {
    let mut clamps = 0;
    let caps: Vec<T> = terms
        .iter()
        .map(|t| {
            if t.er_av > T::lit(MIN_AVAILABLE_RATE) {
                (T::one() - margin) * t.er_av
            } else {
                T::zero()
            }
        })
        .collect();
    for (x, &cap) in ar.iter_mut().zip(&caps) {
        if !x.is_finite() || *x < T::zero() {
            *x = T::zero();
            clamps += 1;
        } else if *x > cap {
            *x = cap;
            clamps += 1;
        }
    }
    for _ in 0..4 {
        let sum: T = ar.iter().copied().sum();
        let residual = gar - sum;
        if residual == T::zero() {
            break;
        }
        if residual > T::zero() {
            let room: T = ar.iter().zip(&caps).map(|(&x, &c)| c - x).sum();
            if room <= T::zero() {
                break;
            }
            for (x, &c) in ar.iter_mut().zip(&caps) {
                *x = (*x + residual * (c - *x) / room).min(c);
            }
        } else {
            if sum <= T::zero() {
                break;
            }
            for x in ar.iter_mut() {
                *x = (*x + residual * *x / sum).max(T::zero());
            }
        }
    }
    clamps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(er: &[f64], cf: &[f64]) -> Vec<ReplyTerm<f64>> {
        er.iter().zip(cf).map(|(&e, &c)| ReplyTerm::linear(e, c)).collect()
    }

    /// Objective of the linear model: Σ cf·x + β·x/(er − x).
    fn cost(terms: &[ReplyTerm<f64>], x: &[f64], beta: f64) -> f64 {
        terms
            .iter()
            .zip(x)
            .map(|(t, &x)| t.cf * x + beta * x / (t.er_av - x))
            .sum()
    }

    /// Brute-force minimizer over the 1-D simplex of two data centers.
    fn grid_two(terms: &[ReplyTerm<f64>], gar: f64, beta: f64, margin: f64, step: f64) -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![0.0, 0.0]);
        let n = (gar / step).round() as usize;
        for k in 0..=n {
            let a = (k as f64 * step).min(gar);
            let x = [a, gar - a];
            if x[0] > (1.0 - margin) * terms[0].er_av || x[1] > (1.0 - margin) * terms[1].er_av {
                continue;
            }
            let c = cost(terms, &x, beta);
            if c < best.0 {
                best = (c, x.to_vec());
            }
        }
        best.1
    }

    #[test]
    fn symmetric_split_closed_form() {
        let t = linear(&[10.0, 10.0], &[0.3, 0.3]);
        let r = closed_form_reply("p", 6.0, &t, 0.1, 0.01).unwrap();
        assert_eq!(r.active, 2);
        assert!((r.ar[0] - 3.0).abs() < 1e-12 && (r.ar[1] - 3.0).abs() < 1e-12);
        let r = refined_reply("p", 6.0, &t, 0.1, 0.01).unwrap();
        assert!((r.ar[0] - 3.0).abs() < 1e-9 && (r.ar[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn pruning_drops_expensive_dc() {
        let t = linear(&[10.0, 10.0], &[0.0, 0.99]);
        let r = closed_form_reply("p", 5.0, &t, 0.1, 0.01).unwrap();
        assert_eq!(r.active, 1);
        assert_eq!(r.ar[1], 0.0);
        assert!((r.ar[0] - 5.0).abs() < 1e-12);
        let oracle = grid_two(&t, 5.0, 0.1, 0.01, 1e-4);
        let refined = refined_reply("p", 5.0, &t, 0.1, 0.01).unwrap();
        for d in 0..2 {
            assert!((refined.ar[d] - oracle[d]).abs() < 1e-3);
        }
    }

    #[test]
    fn asymmetric_matches_grid() {
        let t = linear(&[10.0, 8.0], &[0.2, 0.5]);
        let oracle = grid_two(&t, 6.0, 0.1, 0.01, 1e-4);
        for method in [ReplyMethod::ClosedForm, ReplyMethod::Refined] {
            let r = best_reply(method, "p", 6.0, &t, 0.1, 0.01).unwrap();
            for d in 0..2 {
                assert!((r.ar[d] - oracle[d]).abs() < 1e-3, "{method:?} {:?} vs {oracle:?}", r.ar);
            }
        }
    }

    #[test]
    fn refined_beats_closed_form_when_both_active() {
        let t = linear(&[10.0, 10.0], &[0.2, 0.21]);
        let cf = closed_form_reply("p", 10.0, &t, 0.1, 0.01).unwrap();
        let rf = refined_reply("p", 10.0, &t, 0.1, 0.01).unwrap();
        let oracle = grid_two(&t, 10.0, 0.1, 0.01, 1e-4);
        assert!(cost(&t, &rf.ar, 0.1) <= cost(&t, &cf.ar, 0.1));
        assert!((rf.ar[0] - oracle[0]).abs() < 1e-3);
        assert!((cf.ar[0] - oracle[0]).abs() > 1e-2, "closed form is only approximate here");
    }

    #[test]
    fn conservation_by_construction() {
        let t = linear(&[12.0, 9.0, 20.0], &[0.1, 0.15, 0.3]);
        let r = closed_form_reply("p", 15.0, &t, 0.5, 0.01).unwrap();
        assert!((r.ar.iter().sum::<f64>() - 15.0).abs() < 1e-9);
    }

    #[test]
    fn insufficient_capacity_names_player() {
        let t = linear(&[3.0, 3.0], &[0.1, 0.2]);
        match refined_reply("kmeans", 6.0, &t, 0.1, 0.01) {
            Err(Error::InsufficientCapacity { player, .. }) => assert_eq!(player, "kmeans"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exhausted_dc_is_skipped() {
        let t = linear(&[0.0, 10.0], &[0.0, 0.5]);
        let r = refined_reply("p", 4.0, &t, 0.1, 0.01).unwrap();
        assert_eq!(r.ar[0], 0.0);
        assert!((r.ar[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn marginal_steps_fold_and_sort() {
        let m = MarginalCost::constant(1.0)
            .with_step(5.0, 2.0)
            .with_step(-1.0, 0.5)
            .with_step(3.0, 1.0)
            .with_step(4.0, 0.0);
        assert_eq!(m.base, 1.5);
        assert_eq!(m.steps, vec![(3.0, 1.0), (5.0, 2.0)]);
        assert_eq!(m.right_slope(4.0), 2.5);
        assert_eq!(m.right_slope(6.0), 4.5);
    }

    #[test]
    fn kinked_marginal_cost_water_level() {
        // Cheap up to 4 tasks/h, then expensive: the reply parks on the kink.
        let cheap: ReplyTerm<f64> = ReplyTerm {
            er_av: 10.0,
            cf: 0.1,
            marginal: MarginalCost::constant(0.1).with_step(4.0, 1.0),
        };
        let other = ReplyTerm::linear(10.0, 0.5);
        let r = refined_reply("p", 6.0, &[cheap, other], 0.01, 0.01).unwrap();
        assert!((r.ar[0] - 4.0).abs() < 1e-6, "{:?}", r.ar);
        assert!((r.ar[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn f32_path() {
        let t: Vec<ReplyTerm<f32>> = vec![ReplyTerm::linear(10.0, 0.3), ReplyTerm::linear(10.0, 0.3)];
        let r = refined_reply("p", 6.0f32, &t, 0.1, 0.01).unwrap();
        assert!((r.ar[0] - 3.0).abs() < 1e-3);
        assert!((r.ar.iter().sum::<f32>() - 6.0).abs() < 1e-4);
    }
}
