//! Synthetic scenario generators.
//!
//! `geo_config(n)` builds the 4-, 8- and 16-site configurations shipped under
//! `scenarios/`: 4,320 nodes per site drawn from three Xeon node types, five
//! analytics/AI task types, east-to-west site selection, TOU tariffs on local
//! time, and renewable capacity close to each site's maximum draw. Workload
//! means are set from the computed capacity so that mean utilization sits near
//! 55%.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    ArrivalPattern, DataCenterSpec, NodeTypeSpec, ScenarioConfig, SolverParams, SyntheticRenewable, TaskTypeSpec,
    TraceRef, TraceSource, WorkloadSpec, EPOCHS_PER_DAY,
};
use crate::colocation::{capacity_snapshot, InterferenceModel};

const CLASSES: [&str; 3] = ["low", "medium", "high"];

struct NodeModel {
    id: &'static str,
    cores: u32,
    idle: f64,
    dynamic: f64,
    /// lda, kmeans, naive_bayes, image_to_text, image_to_image
    rates: [f64; 5],
    degradation: [f64; 3],
}

const NODES: [NodeModel; 3] = [
    NodeModel {
        id: "xeon_e3_1225v3",
        cores: 4,
        idle: 0.035,
        dynamic: 0.055,
        rates: [12.0, 9.0, 15.0, 6.0, 10.0],
        degradation: [0.03, 0.07, 0.12],
    },
    NodeModel {
        id: "xeon_e5649",
        cores: 6,
        idle: 0.07,
        dynamic: 0.11,
        rates: [8.0, 6.0, 10.0, 4.0, 7.0],
        degradation: [0.025, 0.06, 0.10],
    },
    NodeModel {
        id: "xeon_e5_2697v2",
        cores: 12,
        idle: 0.09,
        dynamic: 0.19,
        rates: [10.0, 7.5, 12.5, 5.0, 8.5],
        degradation: [0.02, 0.04, 0.06],
    },
];

/// (id, data size in GB, memory-intensity class)
const TASKS: [(&str, f64, &str); 5] = [
    ("lda", 0.233, "medium"),
    ("kmeans", 0.65, "high"),
    ("naive_bayes", 0.5, "low"),
    ("image_to_text", 0.6, "high"),
    ("image_to_image", 0.1, "medium"),
];

/// Fraction of aggregate capacity each task type draws on average.
const UTILIZATION_SHARE: [f64; 5] = [0.13, 0.09, 0.12, 0.10, 0.11];

struct Site {
    id: &'static str,
    tz: i32,
    tou_scale: f64,
    peak_price: f64,
    alpha: f64,
    solar_share: f64,
    cooling: f64,
    efficiency: f64,
}

const fn site(
    id: &'static str,
    tz: i32,
    tou_scale: f64,
    peak_price: f64,
    alpha: f64,
    solar_share: f64,
    cooling: f64,
    efficiency: f64,
) -> Site {
    Site {
        id,
        tz,
        tou_scale,
        peak_price,
        alpha,
        solar_share,
        cooling,
        efficiency,
    }
}

// Ordered so that the first 4 and first 8 entries each span coast to coast.
const SITES: [Site; 16] = [
    site("new_york", 0, 1.35, 18.0, 1.0, 0.4, 0.35, 1.10),
    site("chicago", -1, 1.05, 14.0, 1.0, 0.3, 0.30, 1.08),
    site("denver", -2, 1.00, 13.0, 1.0, 0.6, 0.28, 1.06),
    site("los_angeles", -3, 1.40, 19.0, 1.0, 0.8, 0.40, 1.12),
    site("atlanta", 0, 0.95, 12.0, 1.0, 0.5, 0.45, 1.10),
    site("dallas", -1, 0.90, 10.0, 1.0, 0.6, 0.48, 1.09),
    site("phoenix", -2, 1.05, 12.0, 1.0, 0.9, 0.50, 1.12),
    site("seattle", -3, 0.75, 8.0, 1.0, 0.2, 0.25, 1.05),
    site("boston", 0, 1.30, 16.0, 0.5, 0.3, 0.30, 1.08),
    site("houston", -1, 0.88, 10.0, 0.5, 0.5, 0.50, 1.11),
    site("salt_lake_city", -2, 0.85, 9.0, 0.0, 0.6, 0.30, 1.07),
    site("san_francisco", -3, 1.45, 20.0, 0.5, 0.6, 0.28, 1.06),
    site("miami", 0, 1.00, 11.0, 0.0, 0.6, 0.50, 1.12),
    site("minneapolis", -1, 0.95, 12.0, 1.0, 0.2, 0.25, 1.06),
    site("las_vegas", -3, 1.00, 11.0, 1.0, 0.85, 0.48, 1.10),
    site("portland", -3, 0.80, 9.0, 1.0, 0.3, 0.26, 1.05),
];

const NODES_PER_SITE: u32 = 4320;
const AISLES: u32 = 4;

/// $/kWh by local hour before site scaling.
fn base_tou(hour: usize) -> f64 {
    match hour {
        0..=6 => 0.055,
        7..=11 => 0.085,
        12..=18 => 0.14,
        19..=21 => 0.095,
        _ => 0.06,
    }
}

fn node_types(n_tasks: usize) -> Vec<NodeTypeSpec> {
    NODES
        .iter()
        .map(|n| NodeTypeSpec {
            id: n.id.into(),
            core_count: n.cores,
            idle_power: n.idle,
            avg_peak_dynamic_power: n.dynamic,
            base_exec_rate: TASKS[..n_tasks]
                .iter()
                .zip(n.rates)
                .map(|(t, r)| (t.0.to_string(), r))
                .collect(),
        })
        .collect()
}

fn task_types(n_tasks: usize) -> Vec<TaskTypeSpec> {
    TASKS[..n_tasks]
        .iter()
        .map(|&(id, size, class)| TaskTypeSpec {
            id: id.into(),
            data_size: size,
            memory_intensity_class: class.into(),
        })
        .collect()
}

fn interference(floor: f64) -> InterferenceModel {
    InterferenceModel {
        classes: CLASSES.iter().map(|c| c.to_string()).collect(),
        degradation: NODES
            .iter()
            .map(|n| {
                let row = CLASSES
                    .iter()
                    .zip(n.degradation)
                    .map(|(c, v)| (c.to_string(), v))
                    .collect();
                (n.id.to_string(), row)
            })
            .collect(),
        floor,
    }
}

fn inventory(k: usize, total: u32) -> BTreeMap<String, u32> {
    let split: [u32; 3] = match k % 4 {
        0 => [total / 3, total / 3, total - 2 * (total / 3)],
        1 => [total / 4, total * 5 / 12, total - total / 4 - total * 5 / 12],
        2 => [total * 5 / 12, total / 4, total - total / 4 - total * 5 / 12],
        _ => [total / 2, 0, total - total / 2],
    };
    NODES
        .iter()
        .zip(split)
        .filter(|(_, c)| *c > 0)
        .map(|(n, c)| (n.id.to_string(), c))
        .collect()
}

/// kW drawn at full utilization: (idle + dynamic) · (1 + cooling) · Eff.
fn full_draw(node_types: &[NodeTypeSpec], inv: &BTreeMap<String, u32>, cooling: f64, eff: f64) -> (f64, f64) {
    let (mut idle, mut dynamic) = (0.0, 0.0);
    for (id, &count) in inv {
        let n = node_types.iter().find(|n| &n.id == id).unwrap();
        idle += f64::from(count) * n.idle_power;
        dynamic += f64::from(count) * n.avg_peak_dynamic_power;
    }
    ((idle + dynamic) * (1.0 + cooling) * eff, idle + dynamic)
}

fn set_base_rates(s: &mut ScenarioConfig, shares: &[f64]) {
    let snap = capacity_snapshot(s, 0);
    for (i, t) in s.task_types.iter().enumerate() {
        let rate = (shares[i] * snap.total_for(i)).round().max(1.0);
        s.workload.base_rate.insert(t.id.clone(), rate);
    }
}

/// The `n`-site geo-distributed configuration (n ∈ 1..=16).
pub fn geo_config(n: usize) -> ScenarioConfig {
    assert!((1..=SITES.len()).contains(&n));
    let nts = node_types(TASKS.len());
    let mut traces = BTreeMap::new();
    let data_centers: Vec<DataCenterSpec> = SITES[..n]
        .iter()
        .enumerate()
        .map(|(k, site)| {
            let inv = inventory(k, NODES_PER_SITE);
            let (max_draw, it_full) = full_draw(&nts, &inv, site.cooling, site.efficiency);
            let capacity = max_draw * (0.95 + 0.05 * (k % 3) as f64);
            traces.insert(
                site.id.to_string(),
                TraceSource::Synthetic(SyntheticRenewable {
                    solar_peak_kw: (site.solar_share * capacity).round(),
                    wind_mean_kw: ((1.0 - site.solar_share) * capacity * 0.4).round(),
                    wind_variability: 0.4,
                    seed: 1000 + k as u64,
                }),
            );
            DataCenterSpec {
                id: site.id.into(),
                timezone_offset: site.tz,
                node_inventory: inv,
                crac_count: AISLES,
                crac_max_power: (site.cooling * it_full / f64::from(AISLES) * 100.0).round() / 100.0,
                cooling_factor: site.cooling,
                power_efficiency: site.efficiency,
                tou_prices: (0..EPOCHS_PER_DAY)
                    .map(|h| (base_tou(h) * site.tou_scale * 10_000.0).round() / 10_000.0)
                    .collect(),
                peak_price: site.peak_price,
                net_metering_factor: site.alpha,
                renewable_trace_ref: TraceRef::Named(site.id.into()),
            }
        })
        .collect();

    let mut s = ScenarioConfig {
        name: format!("geo_{n}dc"),
        data_centers,
        node_types: nts,
        task_types: task_types(TASKS.len()),
        workload: WorkloadSpec {
            pattern: ArrivalPattern::Sinusoidal,
            base_rate: BTreeMap::new(),
            amplitude: 0.3,
            phase: 8.0,
            noise_stddev_fraction: 0.0,
            seed: 42,
            rate_table: None,
        },
        interference: interference(0.2),
        solver: SolverParams::default(),
        billing_period_days: 30,
        renewable_traces: traces,
    };
    set_base_rates(&mut s, &UTILIZATION_SHARE);
    s
}

/// Two data centers, two task types, tens of nodes: small enough for the
/// joint grid oracle.
pub fn tiny() -> ScenarioConfig {
    let nts: Vec<NodeTypeSpec> = node_types(2)
        .into_iter()
        .filter(|n| n.id != "xeon_e5649")
        .collect();
    let mut im = interference(0.2);
    im.degradation.remove("xeon_e5649");
    let solar = |peak: f64, tz: i32| -> Vec<f64> {
        (0..EPOCHS_PER_DAY)
            .map(|e| {
                let h = ((e as i32 + tz).rem_euclid(24)) as usize;
                (super::solar_profile(peak, h) * 100.0).round() / 100.0
            })
            .collect()
    };
    let dc = |id: &str, tz: i32, inv: [u32; 2], tou: f64, peak: f64, alpha: f64, sun: f64| DataCenterSpec {
        id: id.into(),
        timezone_offset: tz,
        node_inventory: [("xeon_e3_1225v3".to_string(), inv[0]), ("xeon_e5_2697v2".to_string(), inv[1])].into(),
        crac_count: 1,
        crac_max_power: 1.5,
        cooling_factor: 0.35,
        power_efficiency: 1.1,
        tou_prices: (0..EPOCHS_PER_DAY).map(|h| (base_tou(h) * tou * 10_000.0).round() / 10_000.0).collect(),
        peak_price: peak,
        net_metering_factor: alpha,
        renewable_trace_ref: TraceRef::Inline(solar(sun, tz)),
    };
    let mut s = ScenarioConfig {
        name: "tiny_2dc_2type".into(),
        data_centers: vec![
            dc("east", 0, [12, 8], 1.3, 15.0, 1.0, 2.0),
            dc("west", -3, [6, 14], 1.1, 12.0, 0.5, 4.0),
        ],
        node_types: nts,
        task_types: task_types(2),
        workload: WorkloadSpec {
            pattern: ArrivalPattern::Sinusoidal,
            base_rate: BTreeMap::new(),
            amplitude: 0.3,
            phase: 8.0,
            noise_stddev_fraction: 0.0,
            seed: 7,
            rate_table: None,
        },
        interference: im,
        solver: SolverParams::default(),
        billing_period_days: 30,
        renewable_traces: BTreeMap::new(),
    };
    set_base_rates(&mut s, &[0.3, 0.25]);
    s
}

/// [`tiny`] with every term that the simplified solver ignores switched off:
/// no renewables, no peak charge, free network, no interference.
pub fn no_extras() -> ScenarioConfig {
    let mut s = tiny();
    s.name = "no_extras_2dc_2type".into();
    for dc in &mut s.data_centers {
        dc.renewable_trace_ref = TraceRef::Inline(vec![0.0; EPOCHS_PER_DAY]);
        dc.peak_price = 0.0;
    }
    s.solver.network_price = 0.0;
    for row in s.interference.degradation.values_mut() {
        for c in row.values_mut() {
            *c = 0.0;
        }
    }
    set_base_rates(&mut s, &[0.3, 0.25]);
    s
}

/// [`tiny`] driven by a rate table whose first task type exceeds the whole
/// system's capacity at `epoch`.
pub fn infeasible_at_epoch(epoch: usize) -> ScenarioConfig {
    let mut s = tiny();
    s.name = format!("infeasible_epoch_{epoch}");
    let snap = capacity_snapshot(&s, 0);
    let mut table = BTreeMap::new();
    for (i, t) in s.task_types.iter().enumerate() {
        let base = s.workload.base_rate[&t.id];
        let mut row = vec![base; EPOCHS_PER_DAY];
        if i == 0 {
            row[epoch % EPOCHS_PER_DAY] = (1.5 * snap.total_for(0)).round();
        }
        table.insert(t.id.clone(), row);
    }
    s.workload.pattern = ArrivalPattern::Trace;
    s.workload.rate_table = Some(table);
    s
}

/// A randomized valid scenario with `n_dcs` data centers and `n_tasks`
/// (≤ 5) task types.
pub fn random_scenario(seed: u64, n_dcs: usize, n_tasks: usize) -> ScenarioConfig {
    assert!((1..=TASKS.len()).contains(&n_tasks));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nts = node_types(n_tasks);
    let mut traces = BTreeMap::new();
    let data_centers: Vec<DataCenterSpec> = (0..n_dcs)
        .map(|k| {
            let mut inv = BTreeMap::new();
            for n in &NODES {
                if rng.random_bool(0.7) || inv.is_empty() && n.id == NODES[2].id {
                    inv.insert(n.id.to_string(), rng.random_range(5..400));
                }
            }
            let cooling = rng.random_range(0.2..0.5);
            let eff = rng.random_range(1.0..1.2);
            let (max_draw, it_full) = full_draw(&nts, &inv, cooling, eff);
            let id = format!("dc{k:02}");
            let solar_share = rng.random_range(0.0..1.0);
            let cap = max_draw * rng.random_range(0.0..1.2);
            traces.insert(
                id.clone(),
                TraceSource::Synthetic(SyntheticRenewable {
                    solar_peak_kw: solar_share * cap,
                    wind_mean_kw: (1.0 - solar_share) * cap * 0.4,
                    wind_variability: rng.random_range(0.0..0.6),
                    seed: rng.random(),
                }),
            );
            let tou_scale = rng.random_range(0.6..1.6);
            let alpha = match rng.random_range(0..4) {
                0 => 0.0,
                1 => rng.random_range(0.0..1.0),
                _ => 1.0,
            };
            DataCenterSpec {
                id: id.clone(),
                timezone_offset: -rng.random_range(0..4),
                node_inventory: inv,
                crac_count: rng.random_range(1..5),
                crac_max_power: cooling * it_full / 2.0,
                cooling_factor: cooling,
                power_efficiency: eff,
                tou_prices: (0..EPOCHS_PER_DAY).map(|h| base_tou(h) * tou_scale).collect(),
                peak_price: rng.random_range(0.0..20.0),
                net_metering_factor: alpha,
                renewable_trace_ref: TraceRef::Named(id),
            }
        })
        .collect();

    let target = rng.random_range(0.2..0.65);
    let raw: Vec<f64> = (0..n_tasks).map(|_| rng.random_range(0.5..1.5)).collect();
    let norm: f64 = raw.iter().sum();
    let shares: Vec<f64> = raw.iter().map(|r| target * r / norm).collect();
    let mut s = ScenarioConfig {
        name: format!("random_{seed}"),
        data_centers,
        node_types: nts,
        task_types: task_types(n_tasks),
        workload: WorkloadSpec {
            pattern: if rng.random_bool(0.7) {
                ArrivalPattern::Sinusoidal
            } else {
                ArrivalPattern::Flat
            },
            base_rate: BTreeMap::new(),
            amplitude: rng.random_range(0.0..0.35),
            phase: rng.random_range(0.0..24.0),
            noise_stddev_fraction: rng.random_range(0.0..0.1),
            seed: rng.random(),
            rate_table: None,
        },
        interference: interference(rng.random_range(0.1..0.4)),
        solver: SolverParams {
            beta: rng.random_range(0.01..1.0),
            network_price: rng.random_range(0.0..0.1),
            ..SolverParams::default()
        },
        billing_period_days: 30,
        renewable_traces: traces,
    };
    set_base_rates(&mut s, &shares);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for n in [1, 4, 8, 16] {
            let s = geo_config(n);
            s.validate().unwrap_or_else(|e| panic!("geo_config({n}): {e}"));
            assert_eq!(s.data_centers.len(), n);
            assert!(s.data_centers.iter().all(|d| d.node_count() == 4320));
        }
        tiny().validate().unwrap();
        no_extras().validate().unwrap();
    }

    #[test]
    fn random_scenarios_validate() {
        for seed in 0..40 {
            let s = random_scenario(seed, 2 + (seed as usize % 15), 1 + (seed as usize % 5));
            s.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }

    #[test]
    fn mean_utilization_is_in_target_band() {
        let s = geo_config(4);
        let snap = capacity_snapshot(&s, 0);
        let mean: f64 = (0..24)
            .map(|e| {
                let gar = super::super::arrival_vector(&s.workload, &s.task_types, e);
                (0..gar.len()).map(|i| gar[i] / snap.total_for(i)).sum::<f64>()
            })
            .sum::<f64>()
            / 24.0;
        assert!((0.5..=0.8).contains(&mean), "{mean}");
    }
}
