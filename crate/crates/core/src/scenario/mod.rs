//! Scenario documents: data centers, node and task types, workload, prices,
//! renewable traces and solver parameters.
//!
//! A scenario is a JSON document whose field names match the types below.
//! Maps are ordered (`BTreeMap`) so that serialization, fingerprints and every
//! report derived from a scenario are byte-stable.

mod arrivals;
mod load;
mod renewable;
pub mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::colocation::InterferenceModel;
pub use arrivals::{arrival_vector, generate_arrivals};
pub use load::{
    feasibility_scan, load_scenario, load_scenario_from_path, load_scenario_with_base,
    parse_scenario, parse_scenario_from_path, FeasibilityViolation,
};
pub use renewable::{renewable_power, solar_profile, wind_series};

/// Hourly decision slots per simulated day.
pub const EPOCHS_PER_DAY: usize = 24;

/// A compute node model (one row of the node-type table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTypeSpec {
    pub id: String,
    pub core_count: u32,
    /// kW per node at zero utilization.
    pub idle_power: f64,
    /// kW per node at full utilization above idle.
    pub avg_peak_dynamic_power: f64,
    /// Uncontended tasks/hour per core, keyed by task-type id.
    pub base_exec_rate: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTypeSpec {
    pub id: String,
    /// GB moved per task.
    pub data_size: f64,
    pub memory_intensity_class: String,
}

/// Where a data center's renewable power comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceRef {
    /// 24 hourly kW values on the simulation clock.
    Inline(Vec<f64>),
    /// Key into [`ScenarioConfig::renewable_traces`].
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSource {
    /// 24 hourly kW values on the simulation clock.
    Values { values: Vec<f64> },
    /// CSV file with header `epoch,value` and 24 rows; resolved to `Values`
    /// at load time, relative to the scenario file.
    Csv { path: String },
    /// Solar bell curve on the data center's local clock plus a seeded wind series.
    Synthetic(SyntheticRenewable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRenewable {
    /// kW at local solar noon.
    pub solar_peak_kw: f64,
    /// Mean wind output in kW.
    pub wind_mean_kw: f64,
    /// Relative standard deviation of the wind series.
    #[serde(default)]
    pub wind_variability: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCenterSpec {
    pub id: String,
    /// Hours added to the simulation clock to get local time.
    pub timezone_offset: i32,
    /// Node count per node-type id.
    pub node_inventory: BTreeMap<String, u32>,
    pub crac_count: u32,
    /// kW per CRAC unit at full duty.
    pub crac_max_power: f64,
    /// Cooling kW per IT kW.
    pub cooling_factor: f64,
    /// Power-supply overhead multiplier, at least 1.
    pub power_efficiency: f64,
    /// $/kWh for each local hour 0..23.
    pub tou_prices: Vec<f64>,
    /// $/kW of billing-period peak grid draw.
    pub peak_price: f64,
    /// Fraction of the retail price credited for exported power.
    pub net_metering_factor: f64,
    pub renewable_trace_ref: TraceRef,
}

impl DataCenterSpec {
    /// Total node count.
    pub fn node_count(&self) -> u64 {
        self.node_inventory.values().map(|&n| u64::from(n)).sum()
    }

    /// Local hour for a simulation epoch.
    pub fn local_hour(&self, epoch: usize) -> usize {
        let h = (epoch % EPOCHS_PER_DAY) as i64 + i64::from(self.timezone_offset);
        h.rem_euclid(EPOCHS_PER_DAY as i64) as usize
    }

    /// TOU price in effect at a simulation epoch.
    pub fn price_at(&self, epoch: usize) -> f64 {
        self.tou_prices[self.local_hour(epoch)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalPattern {
    Sinusoidal,
    Flat,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub pattern: ArrivalPattern,
    /// Mean tasks/hour per task-type id.
    pub base_rate: BTreeMap<String, f64>,
    #[serde(default)]
    pub amplitude: f64,
    /// Hours; the sinusoid crests at hour `phase + 6`.
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub noise_stddev_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Hourly tasks/hour per task-type id; required by the `trace` pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_table: Option<BTreeMap<String, Vec<f64>>>,
}

/// How the best reply turns Algorithm-1 water-filling into an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyMethod {
    /// Closed-form split only.
    ClosedForm,
    /// Closed-form split followed by an exact multiplier solve.
    #[default]
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Delay cost factor, $ per unit of rate-weighted queueing delay.
    pub beta: f64,
    /// Convergence tolerance on the summed change in player cost, $.
    pub epsilon: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_margin")]
    pub feasibility_margin: f64,
    /// $/GB.
    pub network_price: f64,
    #[serde(default = "default_epoch_hours")]
    pub epoch_hours: f64,
    #[serde(default)]
    pub reply_method: ReplyMethod,
    #[serde(default = "default_grid_steps")]
    pub oracle_grid_steps: usize,
}

fn default_max_iterations() -> usize {
    1000
}
fn default_margin() -> f64 {
    0.01
}
fn default_epoch_hours() -> f64 {
    1.0
}
fn default_grid_steps() -> usize {
    100
}
fn default_billing_days() -> u32 {
    30
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            epsilon: 1e-3,
            max_iterations: default_max_iterations(),
            feasibility_margin: default_margin(),
            network_price: 0.02,
            epoch_hours: default_epoch_hours(),
            reply_method: ReplyMethod::default(),
            oracle_grid_steps: default_grid_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub data_centers: Vec<DataCenterSpec>,
    pub node_types: Vec<NodeTypeSpec>,
    pub task_types: Vec<TaskTypeSpec>,
    pub workload: WorkloadSpec,
    pub interference: InterferenceModel,
    pub solver: SolverParams,
    #[serde(default = "default_billing_days")]
    pub billing_period_days: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub renewable_traces: BTreeMap<String, TraceSource>,
}

impl ScenarioConfig {
    pub fn node_type(&self, id: &str) -> Option<&NodeTypeSpec> {
        self.node_types.iter().find(|n| n.id == id)
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.task_types.iter().position(|t| t.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
