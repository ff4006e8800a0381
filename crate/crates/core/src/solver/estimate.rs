//! Estimated cost terms used by the game players.
//!
//! These are plain scalar formulas; [`super::game`] wires them to a
//! scenario's data centers and the current strategy profile.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maximum power a data center can dissipate:
/// `(NCR · PCR_max + Σ_j NN_j · P_j^D) · Eff`.
pub fn pd_max<T: Real>(crac_count: T, crac_max_power: T, node_dynamic: &[(T, T)], efficiency: T) -> T {
    let nodes: T = node_dynamic.iter().map(|&(n, p)| n * p).sum();
    (crac_count * crac_max_power + nodes) * efficiency
}

/// `pd_max · ar / er − pr`.
pub fn estimated_power<T: Real>(pd_max: T, ar: T, er: T, pr: T) -> Result<T> {
    if er <= T::zero() {
        return Err(Error::InfeasibleQueue {
            ar: ar.as_f64(),
            er: er.as_f64(),
        });
    }
    Ok(pd_max * ar / er - pr)
}

/// `N_price · NN_d · S_i`.
pub fn nc_max<T: Real>(network_price: T, node_count: T, data_size: T) -> T {
    network_price * node_count * data_size
}

/// `nc_max · ar / er`.
pub fn estimated_network_cost<T: Real>(nc_max: T, ar: T, er: T) -> Result<T> {
    if er <= T::zero() {
        return Err(Error::InfeasibleQueue {
            ar: ar.as_f64(),
            er: er.as_f64(),
        });
    }
    Ok(nc_max * ar / er)
}

/// Net-metering factor applied to a power estimate: 1 when drawing from the
/// grid, `alpha` when exporting.
#[inline]
pub fn metering<T: Real>(power: T, alpha: T) -> T {
    if power >= T::zero() {
        T::one()
    } else {
        alpha
    }
}

/// `E · α' · PD^E · T_e + Δ_peak + NC^E`.
pub fn estimated_dc_cost<T: Real>(price: T, alpha: T, pd_est: T, peak_delta: T, nc_est: T, epoch_hours: T) -> T {
    price * metering(pd_est, alpha) * pd_est * epoch_hours + peak_delta + nc_est
}

/// `β · ar / (er − ar)`.
pub fn estimated_delay_cost<T: Real>(ar: T, er: T, beta: T) -> Result<T> {
    if ar >= er {
        return Err(Error::InfeasibleQueue {
            ar: ar.as_f64(),
            er: er.as_f64(),
        });
    }
    Ok(beta * ar / (er - ar))
}

/// Overall estimated cost of one player: Σ over data centers of
/// (data-center cost + delay cost).
pub fn overall_cost<T: Real>(per_dc: impl IntoIterator<Item = (T, T)>) -> T {
    per_dc.into_iter().map(|(dc, delay)| dc + delay).sum()
}

/// `er − ar`.
pub fn available_rate<T: Real>(er: T, ar: T) -> Result<T> {
    let av = er - ar;
    if av < T::zero() {
        return Err(Error::InfeasibleQueue {
            ar: ar.as_f64(),
            er: er.as_f64(),
        });
    }
    Ok(av)
}

/// Data centers whose available rate (tasks/hour) falls below this are not
/// offered to a player.
pub const MIN_AVAILABLE_RATE: f64 = 1e-9;

/// Estimated capacity factor:
/// `E · α' · (pd_max / er_av − pr) + Δ_peak + nc_max / er_av`,
/// with `α' = 1` because `pd_max > 0`.
pub fn capacity_factor<T: Real>(price: T, pd_max: T, pr: T, peak_delta: T, nc_max: T, er_av: T) -> Result<T> {
    if er_av <= T::lit(MIN_AVAILABLE_RATE) {
        return Err(Error::InfeasibleQueue {
            ar: 0.0,
            er: er_av.as_f64(),
        });
    }
    let alpha = metering(pd_max, T::one());
    Ok(price * alpha * (pd_max / er_av - pr) + peak_delta + nc_max / er_av)
}

/// Lagrangian multiplier at the marginal data center `q`: `CF_q + β / er_av_q`.
pub fn lagrangian<T: Real>(cf_q: T, er_av_q: T, beta: T) -> T {
    cf_q + beta / er_av_q
}
