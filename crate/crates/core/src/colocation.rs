//! Co-location-aware execution rates.
//!
//! A core's rate degrades linearly with the number of co-resident tasks of
//! each memory-intensity class on the same node, down to a floor fraction of
//! the uncontended rate. Data-center capacity sums that rate over every core
//! of every node, assuming each node is fully packed with the task type being
//! rated.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RateMatrix;
use crate::scalar::Real;
use crate::scenario::{DataCenterSpec, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceModel {
    /// Declared memory-intensity classes, e.g. `["low", "medium", "high"]`.
    pub classes: Vec<String>,
    /// Per-co-resident slowdown, keyed by node-type id then class.
    pub degradation: BTreeMap<String, BTreeMap<String, f64>>,
    /// Minimum retained fraction of the uncontended rate.
    pub floor: f64,
}

impl InterferenceModel {
    /// A model with every coefficient zero.
    pub fn none(node_types: &[&str], classes: &[&str]) -> Self {
        let row: BTreeMap<String, f64> = classes.iter().map(|c| (c.to_string(), 0.0)).collect();
        Self {
            classes: classes.iter().map(|c| c.to_string()).collect(),
            degradation: node_types.iter().map(|n| (n.to_string(), row.clone())).collect(),
            floor: 1.0,
        }
    }

    pub fn coefficient(&self, node_type: &str, class: &str) -> f64 {
        self.degradation
            .get(node_type)
            .and_then(|m| m.get(class))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Fraction of the uncontended rate a core retains:
/// `max(floor, 1 − Σ coefficient·count)`.
pub fn retained_fraction<T: Real>(terms: impl IntoIterator<Item = (T, T)>, floor: T) -> T {
    let slowdown: T = terms.into_iter().map(|(c, n)| c * n).sum();
    (T::one() - slowdown).max(floor)
}

/// Co-located execution rate of one core (tasks/hour).
pub fn cer_core(
    scenario: &ScenarioConfig,
    task: &str,
    node_type: &str,
    co_residents: &BTreeMap<String, u32>,
    model: &InterferenceModel,
) -> Result<f64> {
    let node = scenario.node_type(node_type).ok_or_else(|| Error::UnknownId {
        kind: "node type",
        id: node_type.to_string(),
    })?;
    let base = *node.base_exec_rate.get(task).ok_or_else(|| Error::UnknownId {
        kind: "task type",
        id: task.to_string(),
    })?;
    let total: u32 = co_residents.values().sum();
    if total + 1 > node.core_count {
        return Err(Error::validation(
            "co_residents",
            format!("{total} co-residents exceed the {} cores of `{node_type}`", node.core_count),
        ));
    }
    let terms = co_residents
        .iter()
        .map(|(class, &n)| (model.coefficient(node_type, class), f64::from(n)));
    Ok(base * retained_fraction(terms, model.floor))
}

/// Maximum execution rate of one data center for one task type, with every
/// node saturated by that task type.
pub fn data_center_execution_rate(
    scenario: &ScenarioConfig,
    dc: &DataCenterSpec,
    task: &str,
    model: &InterferenceModel,
) -> Result<f64> {
    let class = &scenario
        .task_types
        .iter()
        .find(|t| t.id == task)
        .ok_or_else(|| Error::UnknownId {
            kind: "task type",
            id: task.to_string(),
        })?
        .memory_intensity_class;
    let mut er = 0.0;
    for (node_type, &count) in &dc.node_inventory {
        let node = scenario.node_type(node_type).ok_or_else(|| Error::UnknownId {
            kind: "node type",
            id: node_type.clone(),
        })?;
        let co: BTreeMap<String, u32> = [(class.clone(), node.core_count - 1)].into();
        let per_core = cer_core(scenario, task, node_type, &co, model)?;
        er += f64::from(count) * f64::from(node.core_count) * per_core;
    }
    Ok(er)
}

/// Per-epoch `ER[i][d]` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySnapshot<T> {
    pub er: RateMatrix<T>,
    pub epoch: usize,
}

impl<T: Real> CapacitySnapshot<T> {
    /// `Σ_d ER[i][d]`.
    pub fn total_for(&self, task: usize) -> T {
        self.er.row_sum(task)
    }
}

fn snapshot_with(scenario: &ScenarioConfig, epoch: usize, model: &InterferenceModel) -> CapacitySnapshot<f64> {
    let mut er = RateMatrix::zeros(scenario.task_types.len(), scenario.data_centers.len());
    for (i, t) in scenario.task_types.iter().enumerate() {
        for (d, dc) in scenario.data_centers.iter().enumerate() {
            let v = data_center_execution_rate(scenario, dc, &t.id, model)
                .expect("validated scenario resolves all ids");
            er.set(i, d, v);
        }
    }
    CapacitySnapshot { er, epoch }
}

/// Co-location-aware capacity of every (task type, data center) cell.
pub fn capacity_snapshot(scenario: &ScenarioConfig, epoch: usize) -> CapacitySnapshot<f64> {
    snapshot_with(scenario, epoch, &scenario.interference)
}

/// Capacity with interference switched off (uncontended base rates).
pub fn uncontended_snapshot(scenario: &ScenarioConfig, epoch: usize) -> CapacitySnapshot<f64> {
    let node_ids: Vec<&str> = scenario.node_types.iter().map(|n| n.id.as_str()).collect();
    let classes: Vec<&str> = scenario.interference.classes.iter().map(String::as_str).collect();
    snapshot_with(scenario, epoch, &InterferenceModel::none(&node_ids, &classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::synth;

    fn one_node(cores: u32, base: f64, coef: f64) -> ScenarioConfig {
        let mut s = synth::tiny();
        s.node_types.truncate(1);
        let nt = &mut s.node_types[0];
        nt.core_count = cores;
        for r in nt.base_exec_rate.values_mut() {
            *r = base;
        }
        let id = nt.id.clone();
        for c in s.interference.degradation.get_mut(&id).unwrap().values_mut() {
            *c = coef;
        }
        s.interference.degradation.retain(|k, _| *k == id);
        s.interference.floor = 0.2;
        for dc in &mut s.data_centers {
            dc.node_inventory = [(id.clone(), 1)].into();
        }
        s
    }

    #[test]
    fn no_co_residents_keeps_base_rate() {
        let s = one_node(4, 10.0, 0.1);
        let t = s.task_types[0].id.clone();
        let r = cer_core(&s, &t, &s.node_types[0].id, &BTreeMap::new(), &s.interference).unwrap();
        assert_eq!(r, 10.0);
    }

    #[test]
    fn one_high_co_resident() {
        let s = one_node(4, 10.0, 0.1);
        let t = s.task_types[0].id.clone();
        let co = [("high".to_string(), 1)].into();
        let r = cer_core(&s, &t, &s.node_types[0].id, &co, &s.interference).unwrap();
        assert!((r - 9.0).abs() < 1e-12);
    }

    #[test]
    fn floor_clamps_heavy_interference() {
        let s = one_node(12, 10.0, 0.5);
        let t = s.task_types[0].id.clone();
        let co = [("high".to_string(), 3)].into();
        let r = cer_core(&s, &t, &s.node_types[0].id, &co, &s.interference).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_many_co_residents_and_unknown_ids() {
        let s = one_node(2, 10.0, 0.1);
        let t = s.task_types[0].id.clone();
        let co = [("low".to_string(), 2)].into();
        assert!(cer_core(&s, &t, &s.node_types[0].id, &co, &s.interference).is_err());
        assert!(cer_core(&s, "nope", &s.node_types[0].id, &BTreeMap::new(), &s.interference).is_err());
        assert!(cer_core(&s, &t, "nope", &BTreeMap::new(), &s.interference).is_err());
    }

    #[test]
    fn single_core_node_is_uncontended() {
        let s = one_node(1, 7.5, 0.3);
        let t = s.task_types[0].id.clone();
        let er = data_center_execution_rate(&s, &s.data_centers[0], &t, &s.interference).unwrap();
        assert_eq!(er, 7.5);
    }

    #[test]
    fn two_nodes_four_cores_direct_sum() {
        // CER 0.5/h on every core of 2 nodes × 4 cores.
        let mut s = one_node(4, 0.5, 0.0);
        let id = s.node_types[0].id.clone();
        s.data_centers[0].node_inventory = [(id, 2)].into();
        let t = s.task_types[0].id.clone();
        let er = data_center_execution_rate(&s, &s.data_centers[0], &t, &s.interference).unwrap();
        assert!((er - 4.0).abs() < 1e-12);
    }

    /// Enumerates each core of each node and its co-residents explicitly.
    fn brute_force_er(s: &ScenarioConfig, dc: usize, task: usize) -> f64 {
        let t = &s.task_types[task];
        let mut total = 0.0;
        for (nt_id, &count) in &s.data_centers[dc].node_inventory {
            let nt = s.node_type(nt_id).unwrap();
            for _node in 0..count {
                // every core of the node runs task `t`
                let classes: Vec<&str> = (0..nt.core_count).map(|_| t.memory_intensity_class.as_str()).collect();
                for k in 0..nt.core_count as usize {
                    let mut slow = 0.0;
                    for (other, class) in classes.iter().enumerate() {
                        if other != k {
                            slow += s.interference.degradation[nt_id][*class];
                        }
                    }
                    total += nt.base_exec_rate[&t.id] * (1.0 - slow).max(s.interference.floor);
                }
            }
        }
        total
    }

    #[test]
    fn saturated_rate_matches_enumeration() {
        let s = one_node(4, 10.0, 0.05);
        let t = s.task_types[0].id.clone();
        let er = data_center_execution_rate(&s, &s.data_centers[0], &t, &s.interference).unwrap();
        let oracle = brute_force_er(&s, 0, 0);
        assert!((oracle - 34.0).abs() < 1e-12);
        assert!((er - oracle).abs() < 1e-12);

        let four = synth::geo_config(4);
        for d in 0..4 {
            for i in 0..four.task_types.len() {
                let snap = capacity_snapshot(&four, 0);
                let o = brute_force_er(&four, d, i);
                assert!((snap.er.get(i, d) - o).abs() <= 1e-9 * o);
            }
        }
    }

    #[test]
    fn doubling_inventory_doubles_column() {
        let mut s = synth::tiny();
        let before = capacity_snapshot(&s, 0);
        for n in s.data_centers[1].node_inventory.values_mut() {
            *n *= 2;
        }
        let after = capacity_snapshot(&s, 0);
        for i in 0..s.task_types.len() {
            assert_eq!(after.er.get(i, 0), before.er.get(i, 0));
            assert!((after.er.get(i, 1) - 2.0 * before.er.get(i, 1)).abs() < 1e-9);
        }
    }

    #[test]
    fn homogeneous_columns_are_equal() {
        let mut s = synth::tiny();
        s.data_centers[1].node_inventory = s.data_centers[0].node_inventory.clone();
        let snap = capacity_snapshot(&s, 3);
        for i in 0..s.task_types.len() {
            assert_eq!(snap.er.get(i, 0), snap.er.get(i, 1));
        }
        assert_eq!(snap.epoch, 3);
    }

    #[test]
    fn uncontended_dominates_contended() {
        let s = synth::geo_config(4);
        let a = capacity_snapshot(&s, 0);
        let b = uncontended_snapshot(&s, 0);
        for i in 0..a.er.rows() {
            for d in 0..a.er.cols() {
                assert!(b.er.get(i, d) >= a.er.get(i, d));
            }
        }
    }
}
