use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use super::{
    arrival_vector, ArrivalPattern, DataCenterSpec, ScenarioConfig, TraceRef, TraceSource, EPOCHS_PER_DAY,
};
use crate::colocation::capacity_snapshot;
use crate::error::{Error, Result};

/// Parses, resolves trace files relative to the working directory, validates
/// structure and scans day-0 feasibility.
pub fn load_scenario(source: impl Read) -> Result<ScenarioConfig> {
    load_scenario_with_base(source, None)
}

pub fn load_scenario_with_base(source: impl Read, base: Option<&Path>) -> Result<ScenarioConfig> {
    let scenario = parse_scenario_with_base(source, base)?;
    scenario.check_feasibility()?;
    Ok(scenario)
}

pub fn load_scenario_from_path(path: &Path) -> Result<ScenarioConfig> {
    let scenario = parse_scenario_from_path(path)?;
    scenario.check_feasibility()?;
    Ok(scenario)
}

/// Parses and structurally validates without the feasibility scan.
pub fn parse_scenario(source: impl Read) -> Result<ScenarioConfig> {
    parse_scenario_with_base(source, None)
}

pub fn parse_scenario_from_path(path: &Path) -> Result<ScenarioConfig> {
    let file = std::fs::File::open(path)?;
    parse_scenario_with_base(std::io::BufReader::new(file), path.parent())
}

fn parse_scenario_with_base(mut source: impl Read, base: Option<&Path>) -> Result<ScenarioConfig> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let mut scenario: ScenarioConfig = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    resolve_csv_traces(&mut scenario, base)?;
    scenario.validate_structure()?;
    Ok(scenario)
}

fn resolve_csv_traces(scenario: &mut ScenarioConfig, base: Option<&Path>) -> Result<()> {
    for (name, source) in scenario.renewable_traces.iter_mut() {
        if let TraceSource::Csv { path } = source {
            let full = match base {
                Some(dir) => dir.join(&*path),
                None => Path::new(path.as_str()).to_path_buf(),
            };
            let text = std::fs::read_to_string(&full)
                .map_err(|_| Error::MissingTrace(format!("{name} ({})", full.display())))?;
            let values = parse_trace_csv(&text).map_err(|m| Error::validation(format!("renewable_traces.{name}"), m))?;
            *source = TraceSource::Values { values };
        }
    }
    Ok(())
}

/// Parses a trace file: header `epoch,value` followed by rows for epochs 0..23.
pub fn parse_trace_csv(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("epoch,value") => {}
        other => return Err(format!("expected header `epoch,value`, found {other:?}")),
    }
    let mut values = vec![f64::NAN; EPOCHS_PER_DAY];
    let mut seen = 0;
    for line in lines {
        let (e, v) = line.split_once(',').ok_or_else(|| format!("malformed row `{line}`"))?;
        let e: usize = e.trim().parse().map_err(|_| format!("bad epoch `{e}`"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("bad value `{v}`"))?;
        if e >= EPOCHS_PER_DAY || !values[e].is_nan() {
            return Err(format!("epoch {e} out of range or repeated"));
        }
        values[e] = v;
        seen += 1;
    }
    if seen != EPOCHS_PER_DAY {
        return Err(format!("expected {EPOCHS_PER_DAY} rows, found {seen}"));
    }
    Ok(values)
}

/// Demand that the system cannot serve at some epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityViolation {
    pub epoch: usize,
    /// Offending task type, or `None` for the aggregate utilization check.
    pub task: Option<String>,
    pub demand: f64,
    pub capacity: f64,
}

impl std::fmt::Display for FeasibilityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.task {
            Some(t) => write!(
                f,
                "task type `{t}` at epoch {}: demand {:.3} tasks/h vs capacity {:.3}",
                self.epoch, self.demand, self.capacity
            ),
            None => write!(
                f,
                "aggregate utilization at epoch {}: {:.4} exceeds usable {:.4}",
                self.epoch, self.demand, self.capacity
            ),
        }
    }
}

/// Checks every epoch of day 0: `Σ_d ER[i][d] > GAR_i` for each task type,
/// and `Σ_i GAR_i / Σ_d ER[i][d] < 1 − margin` for the shared capacity.
pub fn feasibility_scan(scenario: &ScenarioConfig) -> Vec<FeasibilityViolation> {
    let mut out = Vec::new();
    let usable = 1.0 - scenario.solver.feasibility_margin;
    for epoch in 0..EPOCHS_PER_DAY {
        let snap = capacity_snapshot(scenario, epoch);
        let gar = arrival_vector(&scenario.workload, &scenario.task_types, epoch);
        let mut utilization = 0.0;
        for (i, t) in scenario.task_types.iter().enumerate() {
            let cap = snap.total_for(i);
            if cap <= gar[i] {
                out.push(FeasibilityViolation {
                    epoch,
                    task: Some(t.id.clone()),
                    demand: gar[i],
                    capacity: cap,
                });
            }
            utilization += gar[i] / cap;
        }
        if utilization >= usable {
            out.push(FeasibilityViolation {
                epoch,
                task: None,
                demand: utilization,
                capacity: usable,
            });
        }
    }
    out
}

fn ensure(cond: bool, path: impl FnOnce() -> String, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(path(), message))
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn finite_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ScenarioConfig {
    /// Structural validation plus the day-0 feasibility scan.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        self.check_feasibility()
    }

    fn check_feasibility(&self) -> Result<()> {
        match feasibility_scan(self).into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::validation("workload", format!("infeasible: {v}"))),
        }
    }

    /// Every invariant that does not need capacities. Stops at the first
    /// violation and names its path.
    pub fn validate_structure(&self) -> Result<()> {
        ensure(!self.data_centers.is_empty(), || "data_centers".into(), "must not be empty")?;
        ensure(!self.node_types.is_empty(), || "node_types".into(), "must not be empty")?;
        ensure(!self.task_types.is_empty(), || "task_types".into(), "must not be empty")?;
        unique(self.data_centers.iter().map(|d| d.id.as_str()), "data_centers")?;
        unique(self.node_types.iter().map(|d| d.id.as_str()), "node_types")?;
        unique(self.task_types.iter().map(|d| d.id.as_str()), "task_types")?;
        ensure(self.billing_period_days >= 1, || "billing_period_days".into(), "must be ≥ 1")?;

        let im = &self.interference;
        ensure(!im.classes.is_empty(), || "interference.classes".into(), "must not be empty")?;
        unique(im.classes.iter().map(String::as_str), "interference.classes")?;
        ensure(
            im.floor.is_finite() && im.floor > 0.0 && im.floor <= 1.0,
            || "interference.floor".into(),
            "floor ∈ (0,1]",
        )?;
        for nt in &self.node_types {
            let row = im
                .degradation
                .get(&nt.id)
                .ok_or_else(|| Error::validation(format!("interference.degradation.{}", nt.id), "missing node type"))?;
            for class in &im.classes {
                let c = row.get(class).copied().ok_or_else(|| {
                    Error::validation(format!("interference.degradation.{}.{class}", nt.id), "missing class")
                })?;
                ensure(
                    c.is_finite() && (0.0..1.0).contains(&c),
                    || format!("interference.degradation.{}.{class}", nt.id),
                    "coefficient ∈ [0,1)",
                )?;
            }
        }
        for key in im.degradation.keys() {
            ensure(
                self.node_type(key).is_some(),
                || format!("interference.degradation.{key}"),
                "unknown node type",
            )?;
        }

        for (k, t) in self.task_types.iter().enumerate() {
            ensure(finite_pos(t.data_size), || format!("task_types[{k}].data_size"), "data_size > 0")?;
            ensure(
                im.classes.contains(&t.memory_intensity_class),
                || format!("task_types[{k}].memory_intensity_class"),
                "class not declared in interference.classes",
            )?;
        }

        for (k, n) in self.node_types.iter().enumerate() {
            let p = |f: &str| format!("node_types[{k}].{f}");
            ensure(n.core_count >= 1, || p("core_count"), "core_count ≥ 1")?;
            ensure(finite_nonneg(n.idle_power), || p("idle_power"), "idle_power ≥ 0")?;
            ensure(
                finite_pos(n.avg_peak_dynamic_power),
                || p("avg_peak_dynamic_power"),
                "avg_peak_dynamic_power > 0",
            )?;
            for t in &self.task_types {
                let r = n.base_exec_rate.get(&t.id).copied();
                ensure(
                    r.is_some_and(finite_pos),
                    || format!("node_types[{k}].base_exec_rate.{}", t.id),
                    "rate > 0 required for every task type",
                )?;
            }
            for key in n.base_exec_rate.keys() {
                ensure(
                    self.task_index(key).is_some(),
                    || format!("node_types[{k}].base_exec_rate.{key}"),
                    "unknown task type",
                )?;
            }
        }

        for (k, dc) in self.data_centers.iter().enumerate() {
            self.validate_dc(k, dc)?;
        }

        self.validate_workload()?;

        let s = &self.solver;
        ensure(finite_pos(s.beta), || "solver.beta".into(), "beta > 0")?;
        ensure(finite_pos(s.epsilon), || "solver.epsilon".into(), "epsilon > 0")?;
        ensure(s.max_iterations >= 1, || "solver.max_iterations".into(), "max_iterations ≥ 1")?;
        ensure(
            s.feasibility_margin > 0.0 && s.feasibility_margin <= 0.5,
            || "solver.feasibility_margin".into(),
            "feasibility_margin ∈ (0, 0.5]",
        )?;
        ensure(finite_nonneg(s.network_price), || "solver.network_price".into(), "network_price ≥ 0")?;
        ensure(finite_pos(s.epoch_hours), || "solver.epoch_hours".into(), "epoch_hours > 0")?;
        ensure(s.oracle_grid_steps >= 1, || "solver.oracle_grid_steps".into(), "oracle_grid_steps ≥ 1")?;
        Ok(())
    }

    fn validate_dc(&self, k: usize, dc: &DataCenterSpec) -> Result<()> {
        let p = |f: &str| format!("data_centers[{k}].{f}");
        ensure(
            dc.power_efficiency.is_finite() && dc.power_efficiency >= 1.0,
            || p("power_efficiency"),
            "power_efficiency ≥ 1",
        )?;
        ensure(
            (0.0..=1.0).contains(&dc.net_metering_factor),
            || p("net_metering_factor"),
            "net_metering_factor ∈ [0,1]",
        )?;
        ensure(
            (0.0..=1.0).contains(&dc.cooling_factor),
            || p("cooling_factor"),
            "cooling_factor ∈ [0,1]",
        )?;
        ensure(dc.crac_count >= 1, || p("crac_count"), "crac_count ≥ 1")?;
        ensure(finite_nonneg(dc.crac_max_power), || p("crac_max_power"), "crac_max_power ≥ 0")?;
        ensure(finite_nonneg(dc.peak_price), || p("peak_price"), "prices ≥ 0")?;
        ensure(
            dc.tou_prices.len() == EPOCHS_PER_DAY,
            || p("tou_prices"),
            "exactly 24 hourly prices",
        )?;
        ensure(dc.tou_prices.iter().all(|&x| finite_nonneg(x)), || p("tou_prices"), "prices ≥ 0")?;
        for key in dc.node_inventory.keys() {
            ensure(
                self.node_type(key).is_some(),
                || format!("data_centers[{k}].node_inventory.{key}"),
                "unknown node type",
            )?;
        }
        ensure(dc.node_count() >= 1, || p("node_inventory"), "at least one node")?;
        match &dc.renewable_trace_ref {
            TraceRef::Inline(v) => check_trace(v, &p("renewable_trace_ref"))?,
            TraceRef::Named(name) => match self.renewable_traces.get(name) {
                None => return Err(Error::MissingTrace(name.clone())),
                Some(TraceSource::Values { values }) => check_trace(values, &format!("renewable_traces.{name}"))?,
                Some(TraceSource::Synthetic(s)) => {
                    let q = format!("renewable_traces.{name}");
                    ensure(
                        finite_nonneg(s.solar_peak_kw) && finite_nonneg(s.wind_mean_kw) && finite_nonneg(s.wind_variability),
                        || q,
                        "synthetic generator parameters must be ≥ 0",
                    )?;
                }
                Some(TraceSource::Csv { path }) => {
                    return Err(Error::MissingTrace(format!("{name} (unresolved csv {path})")))
                }
            },
        }
        Ok(())
    }

    fn validate_workload(&self) -> Result<()> {
        let w = &self.workload;
        ensure(
            w.amplitude.is_finite() && (0.0..1.0).contains(&w.amplitude),
            || "workload.amplitude".into(),
            "amplitude ∈ [0,1)",
        )?;
        ensure(w.phase.is_finite(), || "workload.phase".into(), "phase must be finite")?;
        ensure(
            finite_nonneg(w.noise_stddev_fraction),
            || "workload.noise_stddev_fraction".into(),
            "noise_stddev_fraction ≥ 0",
        )?;
        for t in &self.task_types {
            ensure(
                w.base_rate.get(&t.id).copied().is_some_and(finite_pos),
                || format!("workload.base_rate.{}", t.id),
                "base rate > 0 required for every task type",
            )?;
        }
        for key in w.base_rate.keys() {
            ensure(self.task_index(key).is_some(), || format!("workload.base_rate.{key}"), "unknown task type")?;
        }
        if w.pattern == ArrivalPattern::Trace {
            let table = w
                .rate_table
                .as_ref()
                .ok_or_else(|| Error::validation("workload.rate_table", "trace pattern requires a rate table"))?;
            for t in &self.task_types {
                let row = table
                    .get(&t.id)
                    .ok_or_else(|| Error::validation(format!("workload.rate_table.{}", t.id), "missing task type"))?;
                ensure(
                    row.len() == EPOCHS_PER_DAY && row.iter().all(|&x| finite_pos(x)),
                    || format!("workload.rate_table.{}", t.id),
                    "24 positive hourly rates required",
                )?;
            }
        }
        Ok(())
    }
}

fn check_trace(values: &[f64], path: &str) -> Result<()> {
    ensure(values.len() == EPOCHS_PER_DAY, || path.to_string(), "exactly 24 hourly values")?;
    ensure(values.iter().all(|&x| finite_nonneg(x)), || path.to_string(), "renewable power ≥ 0")
}

fn unique<'a>(ids: impl Iterator<Item = &'a str>, path: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::validation(path, format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}
