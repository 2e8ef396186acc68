//! Seeded episode runner and the statistics reported for a run.
//!
//! A run owns two ChaCha8 streams derived from one seed: stream 0 drives the
//! environment (per slot one normal for the green arrival, then three
//! uniforms for the exogenous step) and stream 1 is handed to the policy.
//! Policies that draw no randomness therefore leave the environment path
//! unchanged, so every policy sees the same exogenous and green sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ExogenousState;
use crate::error::{Error, Result};
use crate::learners::{Policy, PolicyKind, Transition};
use crate::model::{ControlDecision, CostBreakdown, Model, SystemState};
use crate::oracle::{PolicyTable, ValueTable};

/// Slots after which the convergence curve is sampled.
pub const DEFAULT_CHECKPOINTS: [u64; 12] = [
    0, 1_000, 2_000, 5_000, 10_000, 20_000, 30_000, 50_000, 70_000, 100_000, 140_000, 200_000,
];

/// Everything that happened in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTrace {
    pub t: u64,
    pub state: SystemState,
    pub decision: ControlDecision,
    pub green: u32,
    pub cost: CostBreakdown,
    pub next_battery: u32,
    /// Basic operation ran on backup power (`d_op > b`).
    pub backup: bool,
    /// The battery hit `0` or `B` and the excess or shortfall was dropped.
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Composition {
    pub delay: f64,
    pub depreciation: f64,
    pub backup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: String,
    pub seed: u64,
    pub slots: u64,
    /// Undiscounted mean realized cost over the whole run.
    pub time_average_cost: f64,
    /// Fractions of the total cost; all zero when the total is zero.
    pub composition: Composition,
    /// Fraction of slots started at each battery level `0..=B`.
    pub histogram: Vec<f64>,
    /// Slots with a positive backup charge.
    pub backup_slots: u64,
    /// `time_average_curve[t-1]` is the mean cost over the first `t` slots.
    pub time_average_curve: Vec<f64>,
}

/// Builds [`RunMetrics`] from per-slot records. Used both live and when
/// re-reading a trace, so the two agree bit for bit.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    total: f64,
    delay: f64,
    depreciation: f64,
    backup: f64,
    backup_slots: u64,
    counts: Vec<u64>,
    curve: Vec<f64>,
}

impl MetricsAccumulator {
    pub fn new(capacity: u32) -> Self {
        Self {
            total: 0.0,
            delay: 0.0,
            depreciation: 0.0,
            backup: 0.0,
            backup_slots: 0,
            counts: vec![0; capacity as usize + 1],
            curve: Vec::new(),
        }
    }

    pub fn push(&mut self, battery: u32, cost: &CostBreakdown) -> Result<()> {
        let bin = self.counts.get_mut(battery as usize).ok_or_else(|| {
            Error::ShapeMismatch(format!("battery {battery} outside the histogram"))
        })?;
        *bin += 1;
        self.total += cost.total;
        self.delay += cost.wireless_delay + cost.local_delay + cost.offload_delay;
        self.depreciation += cost.depreciation;
        self.backup += cost.backup_cost;
        if cost.backup_cost > 0.0 {
            self.backup_slots += 1;
        }
        self.curve.push(self.total / (self.curve.len() + 1) as f64);
        Ok(())
    }

    pub fn finish(self, policy: impl Into<String>, seed: u64) -> RunMetrics {
        let slots = self.curve.len() as u64;
        let composition = if self.total > 0.0 {
            Composition {
                delay: self.delay / self.total,
                depreciation: self.depreciation / self.total,
                backup: self.backup / self.total,
            }
        } else {
            Composition::default()
        };
        let n = slots.max(1) as f64;
        RunMetrics {
            policy: policy.into(),
            seed,
            slots,
            time_average_cost: self.curve.last().copied().unwrap_or(0.0),
            composition,
            histogram: self.counts.iter().map(|&c| c as f64 / n).collect(),
            backup_slots: self.backup_slots,
            time_average_curve: self.curve,
        }
    }
}

/// Environment state of one run, advanced one slot at a time.
#[derive(Debug, Clone)]
pub struct Simulation<'m> {
    model: &'m Model,
    state: SystemState,
    t: u64,
    env_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
}

impl<'m> Simulation<'m> {
    /// Starts at the configured initial state (midpoint exogenous indices and
    /// a full battery unless overridden).
    pub fn new(model: &'m Model, seed: u64) -> Self {
        let config = model.config();
        let [w, e, h] = config.initial_exogenous_indices();
        let exo = ExogenousState {
            workload_idx: w,
            env_idx: e,
            congestion_idx: h,
        };
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        env_rng.set_stream(0);
        let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
        policy_rng.set_stream(1);
        Self {
            model,
            state: SystemState::new(exo, config.initial_battery_units()),
            t: 0,
            env_rng,
            policy_rng,
        }
    }

    pub fn state(&self) -> SystemState {
        self.state
    }

    /// Slots completed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Runs one slot: decide, draw green energy, realize the cost, move the
    /// battery and the exogenous chains, then let the policy learn.
    pub fn step(&mut self, policy: &mut dyn Policy) -> Result<SlotTrace> {
        let model = self.model;
        let s = self.state;
        let decision = policy.select(model, &s, &mut self.policy_rng);
        let expected = model.decision(&s, decision.power_demand).map_err(|e| {
            Error::InfeasibleDecision(format!(
                "policy {} at slot {} in {s:?}: {e}",
                policy.name(),
                self.t
            ))
        })?;
        if expected.servers != decision.servers {
            return Err(Error::InfeasibleDecision(format!(
                "policy {} at slot {}: {} servers do not draw {} units",
                policy.name(),
                self.t,
                decision.servers,
                decision.power_demand
            )));
        }

        let green = model.exogenous().sample_green(s.env_idx, &mut self.env_rng);
        let cost = model.realized_cost(&s, decision.power_demand, green)?;
        let lambda = model.workload(&s);
        let next_battery = model.battery_transition(s.battery, lambda, decision.power_demand, green);
        let backup = model.is_backup(&s);
        let unclipped = if backup {
            s.battery as i64 + green as i64
        } else {
            s.battery as i64 - model.op_power_at(&s) as i64 - decision.power_demand as i64
                + green as i64
        };
        let next_exo = model.exogenous().step(s.exogenous(), &mut self.env_rng);
        let next = SystemState::new(next_exo, next_battery);

        policy.observe(
            model,
            &Transition {
                state: s,
                decision,
                green,
                cost,
                next,
            },
        );

        let trace = SlotTrace {
            t: self.t,
            state: s,
            decision,
            green,
            cost,
            next_battery,
            backup,
            clipped: unclipped != next_battery as i64,
        };
        self.state = next;
        self.t += 1;
        Ok(trace)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<SlotTrace>,
    pub metrics: RunMetrics,
}

/// Runs `policy` for `slots` slots from the initial state.
pub fn run(model: &Model, policy: &mut dyn Policy, slots: u64, seed: u64) -> Result<RunOutput> {
    if slots == 0 {
        return Err(Error::config("slots", "a run needs at least one slot"));
    }
    let mut sim = Simulation::new(model, seed);
    let mut acc = MetricsAccumulator::new(model.capacity());
    let mut trace = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        let slot = sim.step(policy)?;
        acc.push(slot.state.battery, &slot.cost)?;
        trace.push(slot);
    }
    Ok(RunOutput {
        trace,
        metrics: acc.finish(policy.name(), seed),
    })
}

/// `||V^ - V*|| / ||V*||` in sup norm.
pub fn relative_error(estimate: &ValueTable, reference: &ValueTable) -> Result<f64> {
    let scale = reference.sup_norm();
    if scale == 0.0 {
        return Err(Error::Numeric("reference value table is identically zero".into()));
    }
    Ok(estimate.sup_distance(reference)? / scale)
}

/// Runs a learner and records the relative sup-norm error of its
/// post-decision value estimate against `v_star` after each checkpoint
/// (number of completed slots, ascending).
pub fn convergence_curve(
    model: &Model,
    policy: &mut dyn Policy,
    v_star: &ValueTable,
    checkpoints: &[u64],
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    if v_star.space != *model.space() {
        return Err(Error::ShapeMismatch(format!(
            "reference table indexes {:?}, model has {:?}",
            v_star.space,
            model.space()
        )));
    }
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Numeric("checkpoints must be ascending".into()));
    }
    let mut sim = Simulation::new(model, seed);
    let mut curve = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        while sim.t() < t {
            sim.step(policy)?;
        }
        let estimate = policy.post_value_estimate(model)?.ok_or_else(|| {
            Error::Unsupported(format!("policy {} keeps no value estimate", policy.name()))
        })?;
        curve.push((t, relative_error(&estimate, v_star)?));
    }
    Ok(curve)
}

/// Trailing moving averages over `window` consecutive points.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// The exploration-free decision of `policy` in every state.
pub fn greedy_table(model: &Model, policy: &dyn Policy) -> PolicyTable {
    let space = *model.space();
    PolicyTable {
        space,
        decisions: space.states().map(|s| policy.greedy(model, &s)).collect(),
    }
}

/// One row of a power-demand map: the decision at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyMapRow {
    pub lambda: f64,
    pub e: usize,
    pub h: f64,
    pub b: u32,
    pub a: u32,
    pub m: u32,
    pub mu: f64,
    pub nu: f64,
}

/// Decisions along the battery axis at a fixed exogenous state.
pub fn battery_slice(model: &Model, policy: &PolicyTable, x: ExogenousState) -> Vec<PolicyMapRow> {
    (0..=model.capacity())
        .map(|b| {
            let s = SystemState::new(x, b);
            let d = policy.get(&s);
            PolicyMapRow {
                lambda: model.workload(&s),
                e: s.env_idx,
                h: model.congestion(&s),
                b,
                a: d.power_demand,
                m: d.servers,
                mu: d.local_work,
                nu: d.offloaded,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffloadMapRow {
    pub lambda: f64,
    pub h: f64,
    pub m: u32,
    pub mu: f64,
}

/// Optimal local work for a fixed server count over every (workload,
/// congestion) pair.
pub fn offload_map(model: &Model, servers: u32) -> Result<Vec<OffloadMapRow>> {
    if servers > model.config().max_servers {
        return Err(Error::InfeasibleDecision(format!(
            "{servers} servers requested, at most {} available",
            model.config().max_servers
        )));
    }
    let space = model.space();
    let mut rows = Vec::new();
    for w in 0..space.n_workload {
        for h in 0..space.n_congestion {
            let s = SystemState {
                workload_idx: w,
                env_idx: 0,
                congestion_idx: h,
                battery: 0,
            };
            rows.push(OffloadMapRow {
                lambda: model.workload(&s),
                h: model.congestion(&s),
                m: servers,
                mu: model.inner_for_servers(&s, servers).local_work,
            });
        }
    }
    Ok(rows)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate of one policy over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub runs: usize,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub composition: Composition,
    pub histogram: Vec<f64>,
}

impl PolicySummary {
    pub fn from_runs(policy: impl Into<String>, runs: &[&RunMetrics]) -> Self {
        let n = runs.len().max(1) as f64;
        let costs: Vec<f64> = runs.iter().map(|m| m.time_average_cost).collect();
        let (mean_cost, std_cost) = mean_std(&costs);
        let mut composition = Composition::default();
        let mut histogram = vec![0.0; runs.first().map_or(0, |m| m.histogram.len())];
        for m in runs {
            composition.delay += m.composition.delay / n;
            composition.depreciation += m.composition.depreciation / n;
            composition.backup += m.composition.backup / n;
            for (h, v) in histogram.iter_mut().zip(&m.histogram) {
                *h += v / n;
            }
        }
        Self {
            policy: policy.into(),
            runs: runs.len(),
            mean_cost,
            std_cost,
            composition,
            histogram,
        }
    }
}

/// Outcome of one (policy, seed) job in a batch.
#[derive(Debug)]
pub struct BatchRun {
    pub kind: PolicyKind,
    pub seed: u64,
    pub output: Result<RunOutput>,
}

/// Runs every (policy, seed) pair in parallel. Results come back in
/// policy-major, seed-minor order regardless of scheduling.
pub fn run_batch(model: &Model, kinds: &[PolicyKind], seeds: &[u64], slots: u64) -> Vec<BatchRun> {
    let jobs: Vec<(PolicyKind, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(kind, seed)| {
            let mut policy = kind.build(model);
            BatchRun {
                kind,
                seed,
                output: run(model, policy.as_mut(), slots, seed),
            }
        })
        .collect()
}

/// Per-policy summaries of the successful runs in a batch, in the order the
/// policies were given.
pub fn summarize(kinds: &[PolicyKind], runs: &[BatchRun]) -> Vec<PolicySummary> {
    kinds
        .iter()
        .map(|k| {
            let ok: Vec<&RunMetrics> = runs
                .iter()
                .filter(|r| r.kind == *k)
                .filter_map(|r| r.output.as_ref().ok().map(|o| &o.metrics))
                .collect();
            PolicySummary::from_runs(k.to_string(), &ok)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::learners::FixedPolicy;

    #[test]
    fn single_slot_by_hand() {
        let mut c = ScenarioConfig::default();
        c.green_std_watts = vec![0.0; 3];
        let model = Model::new(c).unwrap();
        let mut p = FixedPolicy { level_units: 0 };
        let out = run(&model, &mut p, 1, 7).unwrap();
        let slot = out.trace[0];
        // lambda = 50, e = Medium (8 units), h = 0.04, b = 160
        assert_eq!(slot.state.battery, 160);
        assert_eq!(slot.green, 8);
        assert_eq!(slot.decision.power_demand, 0);
        let expect = 50.0 / (120.0 * (1.0 - 50.0 / 120.0)) + 50.0 * 0.04;
        assert!((slot.cost.total - expect).abs() < 1e-12);
        assert_eq!(slot.next_battery, 160);
        assert!(slot.clipped && !slot.backup);
        assert_eq!(out.metrics.time_average_cost, slot.cost.total);
        assert_eq!(out.metrics.histogram[160], 1.0);
    }

    #[test]
    fn metrics_sum_to_one() {
        let model = Model::new(ScenarioConfig::small()).unwrap();
        let mut p = FixedPolicy { level_units: 30 };
        let m = run(&model, &mut p, 3000, 1).unwrap().metrics;
        let c = m.composition;
        assert!((c.delay + c.depreciation + c.backup - 1.0).abs() < 1e-9);
        assert!((m.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.time_average_curve.len(), 3000);
    }

    #[test]
    fn zero_slots_rejected() {
        let model = Model::new(ScenarioConfig::small()).unwrap();
        assert!(run(&model, &mut FixedPolicy { level_units: 0 }, 0, 0).is_err());
    }

    #[test]
    fn moving_average_windows() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
        assert!(moving_average(&[1.0], 5).is_empty());
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
