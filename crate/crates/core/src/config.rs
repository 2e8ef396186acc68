//! Scenario parameters and the structured-text config file that produces them.
//!
//! All energy quantities inside [`ScenarioConfig`] are integer energy units of
//! `energy_unit_wh` watt-hours per slot. The config file speaks watts and
//! watt-hours where that is the natural unit, and every key carries its unit in
//! its name. Conversion happens once, at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{default_chain, Matrix};
use crate::error::{Error, Result};

/// Tolerance on row sums of configured transition matrices.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    /// Exponent `p` of the green-deficit learning rate `1 / n_e^p`.
    pub cost_rate_exponent: f64,
    /// Exponent `p` of the post-decision value learning rate `1 / n^p`.
    pub value_rate_exponent: f64,
    /// Exponent of the Q-learning step size `1 / n_{s,a}^p`.
    pub q_rate_exponent: f64,
    /// Exploration floor of the Q-learning schedule `max(floor, t^-exponent)`.
    pub q_epsilon_floor: f64,
    pub q_epsilon_exponent: f64,
    /// Target power demand of the fixed-power baseline, in energy units.
    pub fixed_power_units: u32,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            cost_rate_exponent: 0.7,
            value_rate_exponent: 0.7,
            q_rate_exponent: 0.7,
            q_epsilon_floor: 0.05,
            q_epsilon_exponent: 0.5,
            fixed_power_units: 20,
        }
    }
}

/// Every parameter of one edge-system scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Workload arrival rates, units/sec, ascending.
    pub workload_levels: Vec<f64>,
    /// Backhaul round-trip cost, sec/unit, ascending.
    pub congestion_levels: Vec<f64>,
    pub env_labels: Vec<String>,
    pub battery_capacity_units: u32,
    pub energy_unit_wh: f64,
    pub slot_hours: f64,
    pub max_servers: u32,
    pub server_power_units: u32,
    /// Optional override of the computing power curve: entry `m` is the energy
    /// drawn by `m` active servers. Must start at 0 and be strictly increasing.
    pub server_power_schedule: Option<Vec<u32>>,
    pub service_rate: f64,
    pub static_power_units: u32,
    /// Watts of dynamic base-station power per unit/sec of workload.
    pub dyn_power_coeff: f64,
    pub wireless_capacity: f64,
    pub depreciation_cost: f64,
    pub backup_cost_coeff: f64,
    pub discount: f64,
    pub green_mean_watts: Vec<f64>,
    pub green_std_watts: Vec<f64>,
    pub transition_workload: Matrix,
    pub transition_env: Matrix,
    pub transition_congestion: Matrix,
    pub learning: LearningParams,
    pub depreciation_includes_operation: bool,
    /// Battery level at t = 0; `None` starts full.
    pub initial_battery: Option<u32>,
    /// Exogenous indices `(workload, env, congestion)` at t = 0; `None` uses
    /// the midpoint of each space.
    pub initial_exogenous: Option<[usize; 3]>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let workload_levels: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
        let congestion_levels = vec![0.020, 0.030, 0.040, 0.050, 0.060];
        Self {
            transition_workload: default_chain(workload_levels.len(), 0.6),
            transition_env: default_chain(3, 0.7),
            transition_congestion: default_chain(congestion_levels.len(), 0.6),
            workload_levels,
            congestion_levels,
            env_labels: vec!["Low".into(), "Medium".into(), "High".into()],
            battery_capacity_units: 160,
            energy_unit_wh: 12.5,
            slot_hours: 0.25,
            max_servers: 15,
            server_power_units: 3,
            server_power_schedule: None,
            service_rate: 20.0,
            static_power_units: 6,
            dyn_power_coeff: 0.0,
            wireless_capacity: 120.0,
            depreciation_cost: 0.01,
            backup_cost_coeff: 0.15,
            discount: 0.9,
            green_mean_watts: vec![200.0, 400.0, 600.0],
            green_std_watts: vec![10.0, 10.0, 10.0],
            learning: LearningParams::default(),
            depreciation_includes_operation: false,
            initial_battery: None,
            initial_exogenous: None,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Reduced scenario used for exact verification against value iteration:
    /// four workload levels, three environment states, three congestion levels
    /// and a 40-unit (0.5 kWh) battery. Everything else keeps its default.
    pub fn small() -> Self {
        let workload_levels = vec![10.0, 40.0, 70.0, 100.0];
        let congestion_levels = vec![0.020, 0.040, 0.060];
        Self {
            transition_workload: default_chain(workload_levels.len(), 0.6),
            transition_congestion: default_chain(congestion_levels.len(), 0.6),
            workload_levels,
            congestion_levels,
            battery_capacity_units: 40,
            ..Self::default()
        }
    }

    /// Watts of steady power that amount to one energy unit per slot.
    pub fn watts_per_unit(&self) -> f64 {
        self.energy_unit_wh / self.slot_hours
    }

    pub fn initial_battery_units(&self) -> u32 {
        self.initial_battery.unwrap_or(self.battery_capacity_units)
    }

    pub fn initial_exogenous_indices(&self) -> [usize; 3] {
        self.initial_exogenous.unwrap_or([
            (self.workload_levels.len() - 1) / 2,
            (self.env_labels.len() - 1) / 2,
            (self.congestion_levels.len() - 1) / 2,
        ])
    }

    /// Energy drawn by `m` active servers under the configured power curve.
    pub fn server_power(&self, m: u32) -> u32 {
        match &self.server_power_schedule {
            Some(schedule) => schedule[m as usize],
            None => m * self.server_power_units,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_levels("workload.levels_units_per_sec", &self.workload_levels, 0.0)?;
        check_levels("congestion.levels_sec_per_unit", &self.congestion_levels, 0.0)?;
        if self.env_labels.is_empty() {
            return Err(Error::config("environment.labels", "must not be empty"));
        }
        if !(self.energy_unit_wh > 0.0 && self.energy_unit_wh.is_finite()) {
            return Err(Error::config("energy_unit_wh", "must be positive"));
        }
        if !(self.slot_hours > 0.0 && self.slot_hours.is_finite()) {
            return Err(Error::config("slot_hours", "must be positive"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config("discount", "must lie strictly between 0 and 1"));
        }
        if !(self.depreciation_cost >= 0.0 && self.depreciation_cost.is_finite()) {
            return Err(Error::config("cost.depreciation_per_unit", "must be non-negative"));
        }
        if !(self.backup_cost_coeff >= 0.0 && self.backup_cost_coeff.is_finite()) {
            return Err(Error::config("cost.backup_per_unit", "must be non-negative"));
        }
        if !(self.service_rate > 0.0 && self.service_rate.is_finite()) {
            return Err(Error::config("servers.service_rate_units_per_sec", "must be positive"));
        }
        if !(self.wireless_capacity > 0.0 && self.wireless_capacity.is_finite()) {
            return Err(Error::config(
                "network.wireless_capacity_units_per_sec",
                "must be positive",
            ));
        }
        let max_workload = self.workload_levels.iter().cloned().fold(0.0, f64::max);
        if max_workload >= self.wireless_capacity {
            return Err(Error::config(
                "network.wireless_capacity_units_per_sec",
                format!(
                    "must exceed the largest workload level {max_workload} (utilization < 1)"
                ),
            ));
        }
        if !(self.dyn_power_coeff >= 0.0 && self.dyn_power_coeff.is_finite()) {
            return Err(Error::config(
                "power.dyn_coeff_watts_per_unit_rate",
                "must be non-negative",
            ));
        }
        if self.battery_capacity_units < self.static_power_units {
            return Err(Error::config(
                "battery.capacity_units",
                format!(
                    "capacity {} cannot hold one slot of static power ({})",
                    self.battery_capacity_units, self.static_power_units
                ),
            ));
        }
        if let Some(b0) = self.initial_battery {
            if b0 > self.battery_capacity_units {
                return Err(Error::config("battery.initial_units", "exceeds capacity"));
            }
        }
        if let Some(schedule) = &self.server_power_schedule {
            if schedule.len() != self.max_servers as usize + 1 {
                return Err(Error::config(
                    "servers.power_schedule_units",
                    format!("needs max_count + 1 = {} entries", self.max_servers + 1),
                ));
            }
            if schedule[0] != 0 {
                return Err(Error::config("servers.power_schedule_units", "entry 0 must be 0"));
            }
            if schedule.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(
                    "servers.power_schedule_units",
                    "must be strictly increasing",
                ));
            }
        } else if self.max_servers > 0 && self.server_power_units == 0 {
            return Err(Error::config("servers.power_units", "must be positive"));
        }

        let n_env = self.env_labels.len();
        if self.green_mean_watts.len() != n_env {
            return Err(Error::config(
                "environment.green_mean_watts",
                format!("needs one entry per environment label ({n_env})"),
            ));
        }
        if self.green_std_watts.len() != n_env {
            return Err(Error::config(
                "environment.green_std_watts",
                format!("needs one entry per environment label ({n_env})"),
            ));
        }
        for (i, (&m, &s)) in self
            .green_mean_watts
            .iter()
            .zip(&self.green_std_watts)
            .enumerate()
        {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::config(
                    format!("environment.green_mean_watts[{i}]"),
                    "must be non-negative",
                ));
            }
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config(
                    format!("environment.green_std_watts[{i}]"),
                    "must be non-negative",
                ));
            }
        }

        check_matrix(
            "workload.transition",
            &self.transition_workload,
            self.workload_levels.len(),
        )?;
        check_matrix("environment.transition", &self.transition_env, n_env)?;
        check_matrix(
            "congestion.transition",
            &self.transition_congestion,
            self.congestion_levels.len(),
        )?;

        if let Some([w, e, h]) = self.initial_exogenous {
            if w >= self.workload_levels.len() {
                return Err(Error::config("workload.initial_index", "out of range"));
            }
            if e >= n_env {
                return Err(Error::config("environment.initial_index", "out of range"));
            }
            if h >= self.congestion_levels.len() {
                return Err(Error::config("congestion.initial_index", "out of range"));
            }
        }

        let l = &self.learning;
        for (key, v) in [
            ("learning.cost_rate_exponent", l.cost_rate_exponent),
            ("learning.value_rate_exponent", l.value_rate_exponent),
            ("learning.q_rate_exponent", l.q_rate_exponent),
        ] {
            // Robbins-Monro: sum of n^-p diverges and sum of n^-2p converges.
            if !(v > 0.5 && v <= 1.0) {
                return Err(Error::config(key, "must lie in (0.5, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&l.q_epsilon_floor) {
            return Err(Error::config("learning.q_epsilon_floor", "must lie in [0, 1]"));
        }
        if !(l.q_epsilon_exponent >= 0.0 && l.q_epsilon_exponent.is_finite()) {
            return Err(Error::config("learning.q_epsilon_exponent", "must be non-negative"));
        }
        Ok(())
    }
}

fn check_levels(key: &str, levels: &[f64], min: f64) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::config(key, "must not be empty"));
    }
    for (i, &v) in levels.iter().enumerate() {
        if !(v >= min && v.is_finite()) {
            return Err(Error::config(format!("{key}[{i}]"), format!("must be >= {min}")));
        }
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(key, "must be strictly ascending"));
    }
    Ok(())
}

fn check_matrix(key: &str, m: &Matrix, n: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::config(key, format!("needs {n} rows, found {}", m.len())));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::config(
                format!("{key}[{i}]"),
                format!("needs {n} entries, found {}", row.len()),
            ));
        }
        if let Some(j) = row.iter().position(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::config(
                format!("{key}[{i}][{j}]"),
                "probabilities must be finite and non-negative",
            ));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::config(
                format!("{key}[{i}]"),
                format!("row sums to {sum}, expected 1"),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Config file schema.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    discount: Option<f64>,
    slot_hours: Option<f64>,
    energy_unit_wh: Option<f64>,
    depreciation_includes_operation: Option<bool>,
    #[serde(default)]
    workload: WorkloadSection,
    #[serde(default)]
    congestion: CongestionSection,
    #[serde(default)]
    environment: EnvironmentSection,
    #[serde(default)]
    battery: BatterySection,
    #[serde(default)]
    servers: ServersSection,
    #[serde(default)]
    power: PowerSection,
    #[serde(default)]
    network: NetworkSection,
    #[serde(default)]
    cost: CostSection,
    #[serde(default)]
    learning: LearningSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadSection {
    levels_units_per_sec: Option<Vec<f64>>,
    stay_probability: Option<f64>,
    transition: Option<Matrix>,
    initial_index: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CongestionSection {
    levels_sec_per_unit: Option<Vec<f64>>,
    stay_probability: Option<f64>,
    transition: Option<Matrix>,
    initial_index: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentSection {
    labels: Option<Vec<String>>,
    green_mean_watts: Option<Vec<f64>>,
    green_std_watts: Option<Vec<f64>>,
    stay_probability: Option<f64>,
    transition: Option<Matrix>,
    initial_index: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatterySection {
    capacity_wh: Option<f64>,
    capacity_units: Option<u32>,
    initial_wh: Option<f64>,
    initial_units: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServersSection {
    max_count: Option<u32>,
    power_watts: Option<f64>,
    power_units: Option<u32>,
    power_schedule_units: Option<Vec<u32>>,
    service_rate_units_per_sec: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    static_watts: Option<f64>,
    static_units: Option<u32>,
    dyn_coeff_watts_per_unit_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    wireless_capacity_units_per_sec: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    depreciation_per_unit: Option<f64>,
    backup_per_unit: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearningSection {
    cost_rate_exponent: Option<f64>,
    value_rate_exponent: Option<f64>,
    q_rate_exponent: Option<f64>,
    q_epsilon_floor: Option<f64>,
    q_epsilon_exponent: Option<f64>,
    fixed_power_watts: Option<f64>,
    fixed_power_units: Option<u32>,
}

/// Reads and validates a scenario file. Missing keys take the defaults of
/// [`ScenarioConfig::default`]; unknown keys are rejected.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Parse(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

/// Parses config text (TOML syntax, dotted keys allowed).
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let config = file.into_scenario()?;
    config.validate()?;
    Ok(config)
}

/// Resolves a quantity that may be given either in physical units or directly
/// in energy units, but not both.
fn units_from(
    physical: (&str, Option<f64>),
    direct: (&str, Option<u32>),
    per_unit: f64,
) -> Result<Option<u32>> {
    match (physical.1, direct.1) {
        (Some(_), Some(_)) => Err(Error::config(
            physical.0,
            format!("conflicts with `{}`; give only one", direct.0),
        )),
        (Some(v), None) => whole_units(physical.0, v, per_unit).map(Some),
        (None, units) => Ok(units),
    }
}

/// Converts a watt or watt-hour figure to whole energy units.
fn whole_units(key: &str, value: f64, per_unit: f64) -> Result<u32> {
    let units = value / per_unit;
    let rounded = units.round();
    if !(value >= 0.0) || !units.is_finite() || (units - rounded).abs() > 1e-9 || rounded > u32::MAX as f64 {
        return Err(Error::config(
            key,
            format!("{value} is not a whole number of {per_unit}-sized energy units"),
        ));
    }
    Ok(rounded as u32)
}

fn chain(
    key: &str,
    n: usize,
    transition: Option<Matrix>,
    stay: Option<f64>,
    default_stay: f64,
) -> Result<Matrix> {
    match (transition, stay) {
        (Some(_), Some(_)) => Err(Error::config(
            format!("{key}.transition"),
            format!("conflicts with `{key}.stay_probability`; give only one"),
        )),
        (Some(m), None) => Ok(m),
        (None, stay) => {
            let stay = stay.unwrap_or(default_stay);
            if !(0.0..=1.0).contains(&stay) {
                return Err(Error::config(
                    format!("{key}.stay_probability"),
                    "must lie in [0, 1]",
                ));
            }
            Ok(default_chain(n, stay))
        }
    }
}

impl FileConfig {
    fn into_scenario(self) -> Result<ScenarioConfig> {
        let d = ScenarioConfig::default();
        let energy_unit_wh = self.energy_unit_wh.unwrap_or(d.energy_unit_wh);
        let slot_hours = self.slot_hours.unwrap_or(d.slot_hours);
        if !(energy_unit_wh > 0.0 && energy_unit_wh.is_finite()) {
            return Err(Error::config("energy_unit_wh", "must be positive"));
        }
        if !(slot_hours > 0.0 && slot_hours.is_finite()) {
            return Err(Error::config("slot_hours", "must be positive"));
        }
        let watts_per_unit = energy_unit_wh / slot_hours;

        let workload_levels = self
            .workload
            .levels_units_per_sec
            .unwrap_or(d.workload_levels);
        let congestion_levels = self
            .congestion
            .levels_sec_per_unit
            .unwrap_or(d.congestion_levels);
        let env_labels = self.environment.labels.unwrap_or(d.env_labels);

        let transition_workload = chain(
            "workload",
            workload_levels.len(),
            self.workload.transition,
            self.workload.stay_probability,
            0.6,
        )?;
        let transition_congestion = chain(
            "congestion",
            congestion_levels.len(),
            self.congestion.transition,
            self.congestion.stay_probability,
            0.6,
        )?;
        let transition_env = chain(
            "environment",
            env_labels.len(),
            self.environment.transition,
            self.environment.stay_probability,
            0.7,
        )?;

        let battery_capacity_units = units_from(
            ("battery.capacity_wh", self.battery.capacity_wh),
            ("battery.capacity_units", self.battery.capacity_units),
            energy_unit_wh,
        )?
        .unwrap_or(d.battery_capacity_units);
        let initial_battery = units_from(
            ("battery.initial_wh", self.battery.initial_wh),
            ("battery.initial_units", self.battery.initial_units),
            energy_unit_wh,
        )?;
        let server_power_units = units_from(
            ("servers.power_watts", self.servers.power_watts),
            ("servers.power_units", self.servers.power_units),
            watts_per_unit,
        )?
        .unwrap_or(d.server_power_units);
        let static_power_units = units_from(
            ("power.static_watts", self.power.static_watts),
            ("power.static_units", self.power.static_units),
            watts_per_unit,
        )?
        .unwrap_or(d.static_power_units);
        let fixed_power_units = match (
            self.learning.fixed_power_watts,
            self.learning.fixed_power_units,
        ) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "learning.fixed_power_watts",
                    "conflicts with `learning.fixed_power_units`; give only one",
                ))
            }
            (Some(w), None) if !(w >= 0.0 && w.is_finite()) => {
                return Err(Error::config(
                    "learning.fixed_power_watts",
                    "must be non-negative",
                ))
            }
            (Some(w), None) => watts_to_units_floor(w, watts_per_unit),
            (None, Some(u)) => u,
            (None, None) => d.learning.fixed_power_units,
        };

        let initial_exogenous = match (
            self.workload.initial_index,
            self.environment.initial_index,
            self.congestion.initial_index,
        ) {
            (None, None, None) => None,
            (w, e, h) => Some([
                w.unwrap_or((workload_levels.len().max(1) - 1) / 2),
                e.unwrap_or((env_labels.len().max(1) - 1) / 2),
                h.unwrap_or((congestion_levels.len().max(1) - 1) / 2),
            ]),
        };

        let dl = d.learning;
        Ok(ScenarioConfig {
            workload_levels,
            congestion_levels,
            env_labels,
            battery_capacity_units,
            energy_unit_wh,
            slot_hours,
            max_servers: self.servers.max_count.unwrap_or(d.max_servers),
            server_power_units,
            server_power_schedule: self.servers.power_schedule_units,
            service_rate: self
                .servers
                .service_rate_units_per_sec
                .unwrap_or(d.service_rate),
            static_power_units,
            dyn_power_coeff: self
                .power
                .dyn_coeff_watts_per_unit_rate
                .unwrap_or(d.dyn_power_coeff),
            wireless_capacity: self
                .network
                .wireless_capacity_units_per_sec
                .unwrap_or(d.wireless_capacity),
            depreciation_cost: self.cost.depreciation_per_unit.unwrap_or(d.depreciation_cost),
            backup_cost_coeff: self.cost.backup_per_unit.unwrap_or(d.backup_cost_coeff),
            discount: self.discount.unwrap_or(d.discount),
            green_mean_watts: self
                .environment
                .green_mean_watts
                .unwrap_or(d.green_mean_watts),
            green_std_watts: self
                .environment
                .green_std_watts
                .unwrap_or(d.green_std_watts),
            transition_workload,
            transition_env,
            transition_congestion,
            learning: LearningParams {
                cost_rate_exponent: self
                    .learning
                    .cost_rate_exponent
                    .unwrap_or(dl.cost_rate_exponent),
                value_rate_exponent: self
                    .learning
                    .value_rate_exponent
                    .unwrap_or(dl.value_rate_exponent),
                q_rate_exponent: self.learning.q_rate_exponent.unwrap_or(dl.q_rate_exponent),
                q_epsilon_floor: self.learning.q_epsilon_floor.unwrap_or(dl.q_epsilon_floor),
                q_epsilon_exponent: self
                    .learning
                    .q_epsilon_exponent
                    .unwrap_or(dl.q_epsilon_exponent),
                fixed_power_units,
            },
            depreciation_includes_operation: self
                .depreciation_includes_operation
                .unwrap_or(d.depreciation_includes_operation),
            initial_battery,
            initial_exogenous,
            seed: self.seed.unwrap_or(d.seed),
        })
    }
}

/// Power level in watts to energy units, rounded down (a target that is not a
/// whole number of units can only be met by the unit below it).
pub fn watts_to_units_floor(watts: f64, watts_per_unit: f64) -> u32 {
    let units = watts / watts_per_unit;
    // absorb representation error such as 400 / 50 = 7.999999...
    (units + 1e-9).floor().max(0.0) as u32
}
