use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataCenterSpec, ScenarioConfig, SyntheticRenewable, TraceRef, TraceSource, EPOCHS_PER_DAY};
use crate::error::{Error, Result};

/// Hour-to-hour correlation of the synthetic wind series.
const WIND_CORRELATION: f64 = 0.8;

/// Renewable output (kW) available to a data center at a simulation epoch.
pub fn renewable_power(scenario: &ScenarioConfig, dc: &DataCenterSpec, epoch: usize) -> Result<f64> {
    let hour = epoch % EPOCHS_PER_DAY;
    let value = match &dc.renewable_trace_ref {
        TraceRef::Inline(values) => values[hour],
        TraceRef::Named(name) => match scenario.renewable_traces.get(name) {
            Some(TraceSource::Values { values }) => values[hour],
            Some(TraceSource::Synthetic(s)) => {
                solar_profile(s.solar_peak_kw, dc.local_hour(epoch)) + wind_series(s, epoch / EPOCHS_PER_DAY)[hour]
            }
            Some(TraceSource::Csv { path }) => {
                return Err(Error::MissingTrace(format!("{name} (unresolved csv {path})")))
            }
            None => return Err(Error::MissingTrace(name.clone())),
        },
    };
    Ok(value.max(0.0))
}

/// Daylight bell curve: zero from local 18:00 to 06:00, `peak_kw` at noon.
pub fn solar_profile(peak_kw: f64, local_hour: usize) -> f64 {
    let elevation = (PI * (local_hour as f64 - 12.0) / 12.0).cos();
    peak_kw * elevation.max(0.0)
}

/// One day of hourly wind output: a seeded AR(1) around the mean, clamped at 0.
pub fn wind_series(spec: &SyntheticRenewable, day: usize) -> [f64; EPOCHS_PER_DAY] {
    let mut out = [0.0; EPOCHS_PER_DAY];
    if spec.wind_mean_kw <= 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(day as u64);
    let innovation = (1.0 - WIND_CORRELATION * WIND_CORRELATION).sqrt();
    let mut state: f64 = StandardNormal.sample(&mut rng);
    for slot in out.iter_mut() {
        *slot = (spec.wind_mean_kw * (1.0 + spec.wind_variability * state)).max(0.0);
        let z: f64 = StandardNormal.sample(&mut rng);
        state = WIND_CORRELATION * state + innovation * z;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solar_is_dark_at_midnight_and_peaks_at_noon() {
        assert_eq!(solar_profile(500.0, 0), 0.0);
        assert_eq!(solar_profile(500.0, 12), 500.0);
        assert_eq!(solar_profile(500.0, 19), 0.0);
        assert!(solar_profile(500.0, 9) > 0.0);
    }

    #[test]
    fn wind_is_deterministic_and_non_negative() {
        let s = SyntheticRenewable {
            solar_peak_kw: 0.0,
            wind_mean_kw: 100.0,
            wind_variability: 1.5,
            seed: 3,
        };
        let a = wind_series(&s, 0);
        assert_eq!(a, wind_series(&s, 0));
        assert_ne!(a, wind_series(&s, 1));
        assert!(a.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn zero_wind_without_capacity() {
        let s = SyntheticRenewable {
            solar_peak_kw: 10.0,
            wind_mean_kw: 0.0,
            wind_variability: 0.3,
            seed: 1,
        };
        assert!(wind_series(&s, 4).iter().all(|&w| w == 0.0));
    }
}
