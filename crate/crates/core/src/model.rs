//! Deterministic environment mathematics: delay costs, power demand, battery
//! dynamics, the per-slot offloading/autoscaling problem and the
//! post-decision state map.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::dynamics::{Exogenous, ExogenousState};
use crate::error::{Error, Result};

/// Local work is kept strictly below pooled capacity by this factor so the
/// queueing delay stays finite.
pub const STABILITY_GUARD: f64 = 1e-6;

/// Relative slack under which two objective values count as tied. Ties go to
/// the first candidate, i.e. the smallest power demand.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub workload_idx: usize,
    pub env_idx: usize,
    pub congestion_idx: usize,
    /// Stored energy, in units, `0..=B`.
    pub battery: u32,
}

impl SystemState {
    pub fn new(exo: ExogenousState, battery: u32) -> Self {
        Self {
            workload_idx: exo.workload_idx,
            env_idx: exo.env_idx,
            congestion_idx: exo.congestion_idx,
            battery,
        }
    }

    pub fn exogenous(&self) -> ExogenousState {
        ExogenousState {
            workload_idx: self.workload_idx,
            env_idx: self.env_idx,
            congestion_idx: self.congestion_idx,
        }
    }
}

/// State after the power demand is committed but before green energy arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PostDecisionState {
    pub workload_idx: usize,
    pub env_idx: usize,
    pub congestion_idx: usize,
    pub post_battery: u32,
}

impl PostDecisionState {
    pub fn exogenous(&self) -> ExogenousState {
        ExogenousState {
            workload_idx: self.workload_idx,
            env_idx: self.env_idx,
            congestion_idx: self.congestion_idx,
        }
    }
}

/// A power demand together with the server count and workload split it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub power_demand: u32,
    pub servers: u32,
    /// Workload processed at the edge, units/sec.
    pub local_work: f64,
    /// Workload sent to the cloud, units/sec.
    pub offloaded: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub wireless_delay: f64,
    pub local_delay: f64,
    pub offload_delay: f64,
    pub backup_cost: f64,
    pub depreciation: f64,
    /// Base-station utilization `lambda / theta`.
    pub utilization: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn delay(&self) -> f64 {
        self.wireless_delay + self.local_delay + self.offload_delay
    }

    pub fn backup_invoked(&self) -> bool {
        self.backup_cost > 0.0
    }
}

/// Optimal server count and workload split for a fixed power demand, with
/// the delay components it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub servers: u32,
    pub local_work: f64,
    pub wireless_delay: f64,
    pub local_delay: f64,
    pub offload_delay: f64,
}

impl InnerSolution {
    pub fn delay(&self) -> f64 {
        self.wireless_delay + self.local_delay + self.offload_delay
    }
}

/// Wireless access and transmission delay of an aggregate flow `lambda` over
/// a link of rate `theta`: `lambda / (theta (1 - lambda/theta))`.
pub fn wireless_delay(lambda: f64, theta: f64) -> Result<f64> {
    let utilization = lambda / theta;
    if !(lambda >= 0.0) || !(utilization < 1.0) {
        return Err(Error::config(
            "network.wireless_capacity_units_per_sec",
            format!("utilization {lambda}/{theta} must be below 1"),
        ));
    }
    Ok(lambda / (theta * (1.0 - utilization)))
}

/// Pooled M/G/1 delay cost of serving `mu` on `m` servers of rate `kappa`.
pub fn local_delay(m: u32, mu: f64, kappa: f64) -> Result<f64> {
    if mu == 0.0 {
        return Ok(0.0);
    }
    let capacity = m as f64 * kappa;
    if !(mu > 0.0) || mu >= capacity {
        return Err(Error::InfeasibleDecision(format!(
            "local work {mu} needs capacity above {capacity} ({m} servers)"
        )));
    }
    Ok(mu / (capacity - mu))
}

/// Round-trip cost of offloading `lambda - mu` at congestion `h`.
pub fn offload_delay(lambda: f64, mu: f64, h: f64) -> Result<f64> {
    if mu > lambda || mu < 0.0 {
        return Err(Error::InfeasibleDecision(format!(
            "local work {mu} outside [0, {lambda}]"
        )));
    }
    Ok((lambda - mu) * h)
}

/// Minimizes `mu/(m kappa - mu) + (lambda - mu) h` over the admissible `mu`.
///
/// The objective is convex in `mu` with stationary point
/// `m kappa - sqrt(m kappa / h)`, so the optimum is that point clamped to
/// `[0, min(lambda, m kappa (1 - guard))]`.
pub fn optimal_local_work(lambda: f64, h: f64, m: u32, kappa: f64) -> f64 {
    if m == 0 || lambda == 0.0 {
        return 0.0;
    }
    let capacity = m as f64 * kappa;
    let upper = lambda.min(capacity * (1.0 - STABILITY_GUARD));
    let stationary = if h > 0.0 {
        capacity - (capacity / h).sqrt()
    } else {
        f64::NEG_INFINITY
    };
    stationary.clamp(0.0, upper)
}

/// Index of the first minimum, treating values within [`TIE_TOLERANCE`]
/// (relative) of the incumbent as ties.
pub fn argmin_first(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            None => best = Some((i, v)),
            Some((_, b)) if v < b - TIE_TOLERANCE * b.abs().max(1.0) => best = Some((i, v)),
            _ => {}
        }
    }
    best
}

/// Dimensions of the tabular state space and the flat index layout shared by
/// every table in the crate: `((workload * E + env) * H + congestion) * (B+1) + battery`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    pub n_workload: usize,
    pub n_env: usize,
    pub n_congestion: usize,
    pub battery_capacity: u32,
}

impl StateSpace {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            n_workload: config.workload_levels.len(),
            n_env: config.env_labels.len(),
            n_congestion: config.congestion_levels.len(),
            battery_capacity: config.battery_capacity_units,
        }
    }

    pub fn battery_levels(&self) -> usize {
        self.battery_capacity as usize + 1
    }

    pub fn n_exogenous(&self) -> usize {
        self.n_workload * self.n_env * self.n_congestion
    }

    pub fn len(&self) -> usize {
        self.n_exogenous() * self.battery_levels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn exo_index(&self, x: ExogenousState) -> usize {
        (x.workload_idx * self.n_env + x.env_idx) * self.n_congestion + x.congestion_idx
    }

    pub fn exo_state(&self, i: usize) -> ExogenousState {
        ExogenousState {
            workload_idx: i / (self.n_env * self.n_congestion),
            env_idx: (i / self.n_congestion) % self.n_env,
            congestion_idx: i % self.n_congestion,
        }
    }

    pub fn index(&self, s: &SystemState) -> usize {
        self.exo_index(s.exogenous()) * self.battery_levels() + s.battery as usize
    }

    pub fn post_index(&self, s: &PostDecisionState) -> usize {
        self.exo_index(s.exogenous()) * self.battery_levels() + s.post_battery as usize
    }

    pub fn state(&self, i: usize) -> SystemState {
        let levels = self.battery_levels();
        SystemState::new(self.exo_state(i / levels), (i % levels) as u32)
    }

    pub fn exogenous_states(&self) -> impl Iterator<Item = ExogenousState> + '_ {
        (0..self.n_exogenous()).map(|i| self.exo_state(i))
    }

    pub fn states(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }

    pub fn contains(&self, s: &SystemState) -> bool {
        s.workload_idx < self.n_workload
            && s.env_idx < self.n_env
            && s.congestion_idx < self.n_congestion
            && s.battery <= self.battery_capacity
    }
}

/// A validated scenario with the derived quantities every component needs.
#[derive(Debug, Clone)]
pub struct Model {
    config: ScenarioConfig,
    exogenous: Exogenous,
    space: StateSpace,
    /// `d_op` per workload level.
    op_power: Vec<u32>,
    /// `d_com(m)` for `m = 0..=M`; strictly increasing.
    action_grid: Vec<u32>,
    /// Inner solutions indexed `[(workload * H + congestion) * (M+1) + m]`.
    inner: Vec<InnerSolution>,
}

impl Model {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let exogenous = Exogenous::from_config(&config);
        let space = StateSpace::from_config(&config);
        let op_power = config
            .workload_levels
            .iter()
            .map(|&l| op_power_units(&config, l))
            .collect();
        let action_grid: Vec<u32> = (0..=config.max_servers)
            .map(|m| config.server_power(m))
            .collect();
        let mut inner = Vec::with_capacity(
            config.workload_levels.len() * config.congestion_levels.len() * action_grid.len(),
        );
        for &lambda in &config.workload_levels {
            let wireless = wireless_delay(lambda, config.wireless_capacity)?;
            for &h in &config.congestion_levels {
                for m in 0..=config.max_servers {
                    let mu = optimal_local_work(lambda, h, m, config.service_rate);
                    inner.push(InnerSolution {
                        servers: m,
                        local_work: mu,
                        wireless_delay: wireless,
                        local_delay: local_delay(m, mu, config.service_rate)?,
                        offload_delay: offload_delay(lambda, mu, h)?,
                    });
                }
            }
        }
        Ok(Self {
            config,
            exogenous,
            space,
            op_power,
            action_grid,
            inner,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn exogenous(&self) -> &Exogenous {
        &self.exogenous
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn capacity(&self) -> u32 {
        self.config.battery_capacity_units
    }

    /// Power demand of every server count, `d_com(0..=M)`.
    pub fn action_grid(&self) -> &[u32] {
        &self.action_grid
    }

    pub fn workload(&self, s: &SystemState) -> f64 {
        self.config.workload_levels[s.workload_idx]
    }

    pub fn congestion(&self, s: &SystemState) -> f64 {
        self.config.congestion_levels[s.congestion_idx]
    }

    /// Base-station operation power `d_sta + d_dyn(lambda)` in units per slot.
    pub fn op_power(&self, lambda: f64) -> u32 {
        op_power_units(&self.config, lambda)
    }

    pub fn op_power_at(&self, s: &SystemState) -> u32 {
        self.op_power[s.workload_idx]
    }

    /// Computing power of `m` active servers.
    pub fn com_power(&self, m: u32) -> Result<u32> {
        self.action_grid.get(m as usize).copied().ok_or_else(|| {
            Error::InfeasibleDecision(format!(
                "{m} servers requested, at most {} available",
                self.config.max_servers
            ))
        })
    }

    /// Whether the battery cannot cover basic operation this slot.
    pub fn is_backup(&self, s: &SystemState) -> bool {
        self.op_power_at(s) > s.battery
    }

    /// Energy available for computing, `max(b - d_op, 0)`.
    pub fn compute_budget(&self, s: &SystemState) -> u32 {
        s.battery.saturating_sub(self.op_power_at(s))
    }

    /// Number of feasible server counts; the feasible actions are
    /// `action_grid()[..n]`, which always includes `a = 0`.
    pub fn feasible_count(&self, s: &SystemState) -> usize {
        let budget = self.compute_budget(s);
        self.action_grid.partition_point(|&a| a <= budget)
    }

    /// Feasible power demands in ascending order.
    pub fn feasible_actions(&self, s: &SystemState) -> Vec<u32> {
        self.action_grid[..self.feasible_count(s)].to_vec()
    }

    /// Server count that draws exactly `a`, if any.
    pub fn servers_for(&self, a: u32) -> Option<u32> {
        self.action_grid.binary_search(&a).ok().map(|m| m as u32)
    }

    fn check_feasible(&self, s: &SystemState, a: u32) -> Result<u32> {
        let m = self.servers_for(a).ok_or_else(|| {
            Error::InfeasibleDecision(format!("power demand {a} is not on the action grid"))
        })?;
        if a > self.compute_budget(s) {
            return Err(Error::InfeasibleDecision(format!(
                "power demand {a} exceeds budget {} at battery {}",
                self.compute_budget(s),
                s.battery
            )));
        }
        Ok(m)
    }

    /// Precomputed inner solution for server count `m` in state `s`.
    pub fn inner_for_servers(&self, s: &SystemState, m: u32) -> &InnerSolution {
        let idx = (s.workload_idx * self.config.congestion_levels.len() + s.congestion_idx)
            * self.action_grid.len()
            + m as usize;
        &self.inner[idx]
    }

    /// Minimum delay split achievable with power demand `a`.
    pub fn inner_optimize(&self, s: &SystemState, a: u32) -> Result<InnerSolution> {
        let m = self.check_feasible(s, a)?;
        Ok(*self.inner_for_servers(s, m))
    }

    pub fn decision(&self, s: &SystemState, a: u32) -> Result<ControlDecision> {
        let inner = self.inner_optimize(s, a)?;
        Ok(self.decision_for_servers(s, inner.servers))
    }

    /// Decision for the `m`-th grid action; `m` must be feasible.
    pub fn decision_for_servers(&self, s: &SystemState, m: u32) -> ControlDecision {
        let inner = self.inner_for_servers(s, m);
        ControlDecision {
            power_demand: self.action_grid[m as usize],
            servers: m,
            local_work: inner.local_work,
            offloaded: self.workload(s) - inner.local_work,
        }
    }

    /// Energy whose shortfall against green supply is charged as depreciation.
    fn discharge_demand(&self, s: &SystemState, a: u32) -> u32 {
        if self.config.depreciation_includes_operation {
            self.op_power_at(s) + a
        } else {
            a
        }
    }

    /// Cost of the slot that does not depend on the green arrival, and the
    /// demand `D` entering `omega * max(D - g, 0)` (`None` under backup).
    pub fn cost_parts(&self, s: &SystemState, m: u32) -> (f64, Option<u32>) {
        if self.is_backup(s) {
            let inner = self.inner_for_servers(s, 0);
            let backup = self.config.backup_cost_coeff * self.op_power_at(s) as f64;
            (inner.delay() + backup, None)
        } else {
            let a = self.action_grid[m as usize];
            (
                self.inner_for_servers(s, m).delay(),
                Some(self.discharge_demand(s, a)),
            )
        }
    }

    /// Realized cost of one slot given the green arrival `g`.
    pub fn realized_cost(&self, s: &SystemState, a: u32, g: u32) -> Result<CostBreakdown> {
        let m = self.check_feasible(s, a)?;
        let inner = self.inner_for_servers(s, m);
        let utilization = self.workload(s) / self.config.wireless_capacity;
        let (backup_cost, depreciation) = if self.is_backup(s) {
            (
                self.config.backup_cost_coeff * self.op_power_at(s) as f64,
                0.0,
            )
        } else {
            let demand = self.discharge_demand(s, a);
            (
                0.0,
                self.config.depreciation_cost * demand.saturating_sub(g) as f64,
            )
        };
        let total =
            inner.wireless_delay + inner.local_delay + inner.offload_delay + backup_cost + depreciation;
        Ok(CostBreakdown {
            wireless_delay: inner.wireless_delay,
            local_delay: inner.local_delay,
            offload_delay: inner.offload_delay,
            backup_cost,
            depreciation,
            utilization,
            total,
        })
    }

    /// Expected one-slot cost `c(s, a)` under the exact green distribution.
    pub fn expected_cost(&self, s: &SystemState, a: u32) -> Result<f64> {
        let m = self.check_feasible(s, a)?;
        Ok(self.expected_cost_for_servers(s, m))
    }

    pub(crate) fn expected_cost_for_servers(&self, s: &SystemState, m: u32) -> f64 {
        let (fixed, demand) = self.cost_parts(s, m);
        match demand {
            None => fixed,
            Some(d) => {
                fixed
                    + self.config.depreciation_cost
                        * self.exogenous.green_pmf(s.env_idx).expected_deficit(d)
            }
        }
    }

    /// Next battery level after demand `a` and green arrival `g`.
    pub fn battery_transition(&self, battery: u32, lambda: f64, a: u32, g: u32) -> u32 {
        let cap = self.capacity();
        let d_op = self.op_power(lambda);
        if d_op > battery {
            (battery + g).min(cap)
        } else {
            (battery as i64 - d_op as i64 - a as i64 + g as i64).clamp(0, cap as i64) as u32
        }
    }

    /// Post-decision battery for action `a`.
    pub fn post_battery(&self, s: &SystemState, a: u32) -> u32 {
        let d_op = self.op_power_at(s);
        if d_op > s.battery {
            s.battery
        } else {
            s.battery.saturating_sub(d_op).saturating_sub(a)
        }
    }

    pub fn pds(&self, s: &SystemState, a: u32) -> PostDecisionState {
        PostDecisionState {
            workload_idx: s.workload_idx,
            env_idx: s.env_idx,
            congestion_idx: s.congestion_idx,
            post_battery: self.post_battery(s, a),
        }
    }
}

fn op_power_units(config: &ScenarioConfig, lambda: f64) -> u32 {
    let dynamic_wh = config.dyn_power_coeff * lambda * config.slot_hours;
    config.static_power_units + (dynamic_wh / config.energy_unit_wh).round() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_model() -> Model {
        Model::new(ScenarioConfig::default()).unwrap()
    }

    fn state(model: &Model, lambda: f64, h: f64, battery: u32) -> SystemState {
        let c = model.config();
        SystemState {
            workload_idx: c.workload_levels.iter().position(|&l| l == lambda).unwrap(),
            env_idx: 1,
            congestion_idx: c
                .congestion_levels
                .iter()
                .position(|&x| (x - h).abs() < 1e-12)
                .unwrap(),
            battery,
        }
    }

    #[test]
    fn wireless_delay_values() {
        assert_eq!(wireless_delay(0.0, 120.0).unwrap(), 0.0);
        assert!((wireless_delay(20.0, 120.0).unwrap() - 0.2).abs() < 1e-12);
        assert!((wireless_delay(100.0, 120.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(
            wireless_delay(120.0, 120.0),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn local_delay_values() {
        assert!((local_delay(1, 10.0, 20.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(local_delay(0, 0.0, 20.0).unwrap(), 0.0);
        assert!((local_delay(4, 28.36, 20.0).unwrap() - 0.5492).abs() < 1e-3);
        assert!(local_delay(1, 20.0, 20.0).is_err());
        assert!(local_delay(0, 1.0, 20.0).is_err());
    }

    #[test]
    fn offload_delay_values() {
        assert!((offload_delay(20.0, 10.0, 0.030).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(offload_delay(20.0, 20.0, 0.030).unwrap(), 0.0);
        assert!((offload_delay(60.0, 28.36, 0.030).unwrap() - 0.9492).abs() < 1e-3);
        assert!(offload_delay(20.0, 21.0, 0.030).is_err());
    }

    #[test]
    fn op_power_values() {
        let model = default_model();
        assert_eq!(model.op_power(0.0), 6);
        assert_eq!(model.op_power(100.0), 6);
        let mut c = ScenarioConfig::default();
        c.dyn_power_coeff = 1.0;
        let model = Model::new(c).unwrap();
        assert_eq!(model.op_power(100.0), 8);
        assert_eq!(model.op_power(0.0), 6);
    }

    #[test]
    fn com_power_values() {
        let model = default_model();
        assert_eq!(model.com_power(0).unwrap(), 0);
        assert_eq!(model.com_power(4).unwrap(), 12);
        assert_eq!(model.com_power(15).unwrap(), 45);
        assert!(model.com_power(16).is_err());
    }

    #[test]
    fn feasible_action_sets() {
        let model = default_model();
        assert_eq!(model.feasible_actions(&state(&model, 20.0, 0.03, 4)), vec![0]);
        assert_eq!(
            model.feasible_actions(&state(&model, 20.0, 0.03, 20)),
            vec![0, 3, 6, 9, 12]
        );
        let all: Vec<u32> = (0..=15).map(|m| 3 * m).collect();
        assert_eq!(model.feasible_actions(&state(&model, 20.0, 0.03, 160)), all);
    }

    #[test]
    fn inner_optimize_examples() {
        let model = default_model();
        let s = state(&model, 20.0, 0.03, 160);
        let sol = model.inner_optimize(&s, 0).unwrap();
        assert_eq!(sol.servers, 0);
        assert_eq!(sol.local_work, 0.0);
        assert!((sol.delay() - 0.8).abs() < 1e-12);

        let s = state(&model, 60.0, 0.03, 160);
        let sol = model.inner_optimize(&s, 12).unwrap();
        assert_eq!(sol.servers, 4);
        assert!((sol.local_work - 28.36).abs() < 0.02);
        let expected = wireless_delay(60.0, 120.0).unwrap() + 0.549 + 0.949;
        assert!((sol.delay() - expected).abs() < 2e-3);

        let s = state(&model, 20.0, 0.06, 160);
        let sol = model.inner_optimize(&s, 12).unwrap();
        assert_eq!(sol.local_work, 20.0);

        assert!(model.inner_optimize(&s, 13).is_err());
        let poor = state(&model, 20.0, 0.06, 10);
        assert!(model.inner_optimize(&poor, 12).is_err());
    }

    #[test]
    fn realized_cost_examples() {
        let model = default_model();
        let backup = state(&model, 20.0, 0.03, 4);
        let c = model.realized_cost(&backup, 0, 3).unwrap();
        assert!((c.backup_cost - 0.9).abs() < 1e-12);
        assert!((c.delay() - 0.8).abs() < 1e-12);
        assert!((c.total - 1.7).abs() < 1e-12);
        assert_eq!(c.depreciation, 0.0);

        let s = state(&model, 60.0, 0.03, 30);
        let c = model.realized_cost(&s, 12, 8).unwrap();
        assert!((c.depreciation - 0.04).abs() < 1e-12);
        let c = model.realized_cost(&s, 12, 20).unwrap();
        assert_eq!(c.depreciation, 0.0);
        assert!(!c.backup_invoked());
        assert!(model.realized_cost(&s, 30, 0).is_err());
    }

    #[test]
    fn depreciation_can_include_operation() {
        let mut c = ScenarioConfig::default();
        c.depreciation_includes_operation = true;
        let model = Model::new(c).unwrap();
        let s = state(&model, 60.0, 0.03, 30);
        let cost = model.realized_cost(&s, 12, 8).unwrap();
        assert!((cost.depreciation - 0.01 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn battery_transition_examples() {
        let model = default_model();
        assert_eq!(model.battery_transition(30, 20.0, 12, 8), 20);
        assert_eq!(model.battery_transition(158, 20.0, 0, 12), 160);
        assert_eq!(model.battery_transition(4, 20.0, 0, 8), 12);
        assert_eq!(model.battery_transition(6, 20.0, 0, 0), 0);
    }

    #[test]
    fn pds_examples() {
        let model = default_model();
        assert_eq!(model.pds(&state(&model, 20.0, 0.03, 30), 12).post_battery, 12);
        assert_eq!(model.pds(&state(&model, 20.0, 0.03, 4), 0).post_battery, 4);
        assert_eq!(model.pds(&state(&model, 20.0, 0.03, 6), 0).post_battery, 0);
    }

    #[test]
    fn state_space_round_trip() {
        let model = Model::new(ScenarioConfig::small()).unwrap();
        let space = model.space();
        for i in 0..space.len() {
            assert_eq!(space.index(&space.state(i)), i);
        }
        for i in 0..space.n_exogenous() {
            assert_eq!(space.exo_index(space.exo_state(i)), i);
        }
    }

    #[test]
    fn argmin_prefers_first_of_ties() {
        assert_eq!(argmin_first([3.0, 1.0, 1.0, 2.0]), Some((1, 1.0)));
        assert_eq!(argmin_first([1.0, 1.0 + 1e-15]), Some((0, 1.0)));
        assert_eq!(argmin_first(std::iter::empty()), None);
    }
}
