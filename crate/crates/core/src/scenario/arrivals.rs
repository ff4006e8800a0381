use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ArrivalPattern, TaskTypeSpec, WorkloadSpec, EPOCHS_PER_DAY};

/// Lower bound on a generated rate, as a fraction of its mean.
const RATE_FLOOR_FRACTION: f64 = 0.01;

/// Global arrival rate per task type at a simulation epoch.
///
/// `GAR_i(τ) = base_i · (1 + amplitude · sin(2π(h − phase)/24)) + base_i · σ · z`
/// with `h = τ mod 24` and `z` a standard normal draw from a ChaCha8 stream
/// keyed by `(seed, τ)`. The result never drops below 1% of `base_i`.
pub fn generate_arrivals(
    workload: &WorkloadSpec,
    task_types: &[TaskTypeSpec],
    epoch: usize,
) -> BTreeMap<String, f64> {
    task_types
        .iter()
        .zip(arrival_vector(workload, task_types, epoch))
        .map(|(t, r)| (t.id.clone(), r))
        .collect()
}

/// [`generate_arrivals`] in task-type order.
pub fn arrival_vector(workload: &WorkloadSpec, task_types: &[TaskTypeSpec], epoch: usize) -> Vec<f64> {
    let hour = epoch % EPOCHS_PER_DAY;
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed);
    rng.set_stream(epoch as u64);

    task_types
        .iter()
        .map(|t| {
            let base = workload.base_rate[&t.id];
            let shaped = match workload.pattern {
                ArrivalPattern::Flat => base,
                ArrivalPattern::Sinusoidal => {
                    let angle = 2.0 * PI * (hour as f64 - workload.phase) / EPOCHS_PER_DAY as f64;
                    base * (1.0 + workload.amplitude * angle.sin())
                }
                ArrivalPattern::Trace => {
                    workload.rate_table.as_ref().expect("validated trace table")[&t.id][hour]
                }
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            let noisy = if workload.noise_stddev_fraction > 0.0 {
                shaped + base * workload.noise_stddev_fraction * z
            } else {
                shaped
            };
            noisy.max(base * RATE_FLOOR_FRACTION)
        })
        .collect()
}
