//! Online control policies behind one interface: the post-decision-state
//! learner, tabular Q-learning, and the myopic and fixed-power baselines.
//!
//! Every policy sees the same per-slot protocol: [`Policy::select`] with the
//! current state, then [`Policy::observe`] with the realized [`Transition`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::config::watts_to_units_floor;
use crate::error::{Error, Result};
use crate::model::{argmin_first, ControlDecision, CostBreakdown, Model, SystemState};
use crate::oracle::{pds_value, PolicyTable, ValueTable};

/// One realized slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: SystemState,
    pub decision: ControlDecision,
    pub green: u32,
    pub cost: CostBreakdown,
    pub next: SystemState,
}

pub trait Policy: Send {
    fn name(&self) -> String;

    /// Decision for the current slot. Must be feasible in `s`.
    fn select(&mut self, model: &Model, s: &SystemState, rng: &mut dyn RngCore)
        -> ControlDecision;

    /// Learns from the slot that just completed.
    fn observe(&mut self, _model: &Model, _step: &Transition) {}

    /// Exploration-free decision under the current estimates.
    fn greedy(&self, model: &Model, s: &SystemState) -> ControlDecision;

    /// Current estimate of the post-decision value function, if the policy
    /// keeps one.
    fn post_value_estimate(&self, _model: &Model) -> Result<Option<ValueTable>> {
        Ok(None)
    }
}

/// `1 / n^p`, the step size after the `n`-th visit.
fn rate(n: u64, exponent: f64) -> f64 {
    (n as f64).powf(-exponent)
}

/// Running estimate of the expected one-slot cost `c^(s, a)`.
pub trait CostEstimator: Send {
    /// Estimate for the `m`-th grid action in `s`.
    fn estimate(&self, model: &Model, s: &SystemState, m: u32) -> f64;

    /// Batch update of every estimate that shares environment `env_idx` with
    /// green arrival `g`.
    fn observe_green(&mut self, model: &Model, env_idx: usize, g: u32);

    fn env_visits(&self) -> &[u64];
}

/// `c^(s,a) = c_delay*(s,a) + omega * e^(e, D)`: the only random part of the
/// slot cost is the depreciation `omega * max(D - g, 0)`, whose innovation
/// depends on the demand `D` and the green draw alone, so one estimate per
/// (environment, demand) reproduces the full per-state table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredCost {
    /// `deficit[e][d]` estimates `E[max(d - g, 0) | e]`.
    pub deficit: Vec<Vec<f64>>,
    pub visits: Vec<u64>,
    exponent: f64,
}

impl FactoredCost {
    pub fn new(model: &Model) -> Self {
        let config = model.config();
        let max_action = *model.action_grid().last().expect("grid includes a = 0");
        let max_demand = if config.depreciation_includes_operation {
            let max_op = config
                .workload_levels
                .iter()
                .map(|&l| model.op_power(l))
                .max()
                .unwrap_or(0);
            max_op + max_action
        } else {
            max_action
        };
        let n_env = config.env_labels.len();
        Self {
            deficit: vec![vec![0.0; max_demand as usize + 1]; n_env],
            visits: vec![0; n_env],
            exponent: config.learning.cost_rate_exponent,
        }
    }
}

impl CostEstimator for FactoredCost {
    fn estimate(&self, model: &Model, s: &SystemState, m: u32) -> f64 {
        let (fixed, demand) = model.cost_parts(s, m);
        match demand {
            None => fixed,
            Some(d) => fixed + model.config().depreciation_cost * self.deficit[s.env_idx][d as usize],
        }
    }

    fn observe_green(&mut self, _model: &Model, env_idx: usize, g: u32) {
        self.visits[env_idx] += 1;
        let rho = rate(self.visits[env_idx], self.exponent);
        for (d, est) in self.deficit[env_idx].iter_mut().enumerate() {
            let sample = (d as u32).saturating_sub(g) as f64;
            *est += rho * (sample - *est);
        }
    }

    fn env_visits(&self) -> &[u64] {
        &self.visits
    }
}

/// One estimate per (state, server count), every state with the observed
/// environment updated with its own realized cost. Memory `|S| (M+1)`; kept
/// as the reference the factored form is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteralCost {
    /// Indexed `[state * (M+1) + m]`.
    pub table: Vec<f64>,
    pub visits: Vec<u64>,
    exponent: f64,
}

impl LiteralCost {
    /// Starts every entry at the deterministic part of its cost, which is
    /// what the factored form reports before any green energy is seen.
    pub fn new(model: &Model) -> Self {
        let space = model.space();
        let n_actions = model.action_grid().len();
        let mut table = Vec::with_capacity(space.len() * n_actions);
        for s in space.states() {
            for m in 0..n_actions as u32 {
                table.push(model.cost_parts(&s, m).0);
            }
        }
        Self {
            table,
            visits: vec![0; model.config().env_labels.len()],
            exponent: model.config().learning.cost_rate_exponent,
        }
    }
}

impl CostEstimator for LiteralCost {
    fn estimate(&self, model: &Model, s: &SystemState, m: u32) -> f64 {
        self.table[model.space().index(s) * model.action_grid().len() + m as usize]
    }

    fn observe_green(&mut self, model: &Model, env_idx: usize, g: u32) {
        self.visits[env_idx] += 1;
        let rho = rate(self.visits[env_idx], self.exponent);
        let omega = model.config().depreciation_cost;
        let n_actions = model.action_grid().len();
        for (i, s) in model.space().states().enumerate() {
            if s.env_idx != env_idx {
                continue;
            }
            for m in 0..n_actions {
                let (fixed, demand) = model.cost_parts(&s, m as u32);
                let realized = match demand {
                    None => fixed,
                    Some(d) => fixed + omega * d.saturating_sub(g) as f64,
                };
                let est = &mut self.table[i * n_actions + m];
                *est += rho * (realized - *est);
            }
        }
    }

    fn env_visits(&self) -> &[u64] {
        &self.visits
    }
}

fn greedy_with<C: CostEstimator>(
    model: &Model,
    costs: &C,
    s: &SystemState,
    discount: f64,
    post_values: &[f64],
) -> (u32, f64) {
    let base = model.space().exo_index(s.exogenous()) * model.space().battery_levels();
    let grid = model.action_grid();
    let q = (0..model.feasible_count(s)).map(|m| {
        let post = model.post_battery(s, grid[m]) as usize;
        costs.estimate(model, s, m as u32) + discount * post_values[base + post]
    });
    let (m, v) = argmin_first(q).expect("a = 0 is always feasible");
    (m as u32, v)
}

/// Learner of the post-decision value function `V^` with known one-slot
/// structure and an estimated green-energy deficit.
///
/// After each slot it refreshes the cost estimates for the observed
/// environment, recomputes `C^` along the battery axis at the next exogenous
/// state, and moves `V^(x_t, b~)` toward `C^(x_{t+1}, min(b~ + g, B))` for
/// every `b~`. Action selection is purely greedy.
#[derive(Debug, Clone)]
pub struct PdsLearner<C: CostEstimator = FactoredCost> {
    pub costs: C,
    pub post_values: ValueTable,
    pub normal_values: ValueTable,
    pub exo_visits: Vec<u64>,
    exponent: f64,
}

impl PdsLearner<FactoredCost> {
    pub fn new(model: &Model) -> Self {
        Self::with_estimator(model, FactoredCost::new(model))
    }
}

impl PdsLearner<LiteralCost> {
    pub fn literal(model: &Model) -> Self {
        Self::with_estimator(model, LiteralCost::new(model))
    }
}

impl<C: CostEstimator> PdsLearner<C> {
    pub fn with_estimator(model: &Model, costs: C) -> Self {
        let space = *model.space();
        Self {
            costs,
            post_values: ValueTable::constant(space, 0.0),
            normal_values: ValueTable::constant(space, 0.0),
            exo_visits: vec![0; space.n_exogenous()],
            exponent: model.config().learning.value_rate_exponent,
        }
    }

    /// `(server count, c^ + delta V^)` minimizing the lookahead in `s`.
    pub fn lookahead(&self, model: &Model, s: &SystemState) -> (u32, f64) {
        greedy_with(model, &self.costs, s, model.discount(), &self.post_values.values)
    }

    pub fn update(&mut self, model: &Model, step: &Transition) {
        let space = *model.space();
        let levels = space.battery_levels();
        let cap = model.capacity();

        self.costs.observe_green(model, step.state.env_idx, step.green);

        let next_exo = step.next.exogenous();
        let next_base = space.exo_index(next_exo) * levels;
        for b in 0..=cap {
            let (_, v) = self.lookahead(model, &SystemState::new(next_exo, b));
            self.normal_values.values[next_base + b as usize] = v;
        }

        let x = space.exo_index(step.state.exogenous());
        self.exo_visits[x] += 1;
        let alpha = rate(self.exo_visits[x], self.exponent);
        let base = x * levels;
        for post in 0..=cap {
            let target = self.normal_values.values[next_base + (post + step.green).min(cap) as usize];
            let v = &mut self.post_values.values[base + post as usize];
            *v += alpha * (target - *v);
        }
    }
}

impl<C: CostEstimator + 'static> Policy for PdsLearner<C> {
    fn name(&self) -> String {
        "pds".into()
    }

    fn select(&mut self, model: &Model, s: &SystemState, _rng: &mut dyn RngCore) -> ControlDecision {
        self.greedy(model, s)
    }

    fn observe(&mut self, model: &Model, step: &Transition) {
        self.update(model, step);
    }

    fn greedy(&self, model: &Model, s: &SystemState) -> ControlDecision {
        model.decision_for_servers(s, self.lookahead(model, s).0)
    }

    fn post_value_estimate(&self, _model: &Model) -> Result<Option<ValueTable>> {
        Ok(Some(self.post_values.clone()))
    }
}

/// Tabular Q-learning over (state, server count) with epsilon-greedy
/// exploration `max(floor, t^-p)` and step size `1 / n(s,a)^p`.
#[derive(Debug, Clone)]
pub struct QLearner {
    /// Indexed `[state * (M+1) + m]`.
    pub q: Vec<f64>,
    pub visits: Vec<u64>,
    pub steps: u64,
    n_actions: usize,
}

impl QLearner {
    pub fn new(model: &Model) -> Self {
        let n_actions = model.action_grid().len();
        let len = model.space().len() * n_actions;
        Self {
            q: vec![0.0; len],
            visits: vec![0; len],
            steps: 0,
            n_actions,
        }
    }

    fn row(&self, model: &Model, s: &SystemState) -> &[f64] {
        let start = model.space().index(s) * self.n_actions;
        &self.q[start..start + model.feasible_count(s)]
    }

    /// `(argmin, min)` of Q over the feasible actions of `s`.
    pub fn best(&self, model: &Model, s: &SystemState) -> (u32, f64) {
        let (m, v) = argmin_first(self.row(model, s).iter().copied()).expect("a = 0 is always feasible");
        (m as u32, v)
    }

    pub fn epsilon(&self, model: &Model) -> f64 {
        let p = &model.config().learning;
        (self.steps.max(1) as f64).powf(-p.q_epsilon_exponent).max(p.q_epsilon_floor)
    }

    /// One Q update from an arbitrary (state, server count, cost, next state).
    pub fn update(&mut self, model: &Model, s: &SystemState, m: u32, cost: f64, next: &SystemState) {
        let target = cost + model.discount() * self.best(model, next).1;
        let i = model.space().index(s) * self.n_actions + m as usize;
        self.visits[i] += 1;
        let alpha = rate(self.visits[i], model.config().learning.q_rate_exponent);
        self.q[i] += alpha * (target - self.q[i]);
    }

    /// `min_a Q(s, a)` for every state.
    pub fn normal_values(&self, model: &Model) -> ValueTable {
        let space = *model.space();
        ValueTable::new(space, space.states().map(|s| self.best(model, &s).1).collect())
    }
}

impl Policy for QLearner {
    fn name(&self) -> String {
        "qlearning".into()
    }

    fn select(&mut self, model: &Model, s: &SystemState, rng: &mut dyn RngCore) -> ControlDecision {
        self.steps += 1;
        let explore = rng.random::<f64>() < self.epsilon(model);
        let m = if explore {
            rng.random_range(0..model.feasible_count(s)) as u32
        } else {
            self.best(model, s).0
        };
        model.decision_for_servers(s, m)
    }

    fn observe(&mut self, model: &Model, step: &Transition) {
        self.update(model, &step.state, step.decision.servers, step.cost.total, &step.next);
    }

    fn greedy(&self, model: &Model, s: &SystemState) -> ControlDecision {
        model.decision_for_servers(s, self.best(model, s).0)
    }

    /// Post-decision values implied by `min_a Q` under the true dynamics.
    fn post_value_estimate(&self, model: &Model) -> Result<Option<ValueTable>> {
        pds_value(model, &self.normal_values(model)).map(Some)
    }
}

/// Minimizes the estimated current-slot cost, ignoring the future. The
/// max-spend variant instead runs as many servers as the battery allows.
#[derive(Debug, Clone)]
pub struct MyopicPolicy {
    pub costs: FactoredCost,
    pub max_spend: bool,
}

impl MyopicPolicy {
    pub fn new(model: &Model, max_spend: bool) -> Self {
        Self {
            costs: FactoredCost::new(model),
            max_spend,
        }
    }
}

impl Policy for MyopicPolicy {
    fn name(&self) -> String {
        if self.max_spend { "myopic-maxspend" } else { "myopic" }.into()
    }

    fn select(&mut self, model: &Model, s: &SystemState, _rng: &mut dyn RngCore) -> ControlDecision {
        self.greedy(model, s)
    }

    fn observe(&mut self, model: &Model, step: &Transition) {
        self.costs.observe_green(model, step.state.env_idx, step.green);
    }

    fn greedy(&self, model: &Model, s: &SystemState) -> ControlDecision {
        let n = model.feasible_count(s);
        let m = if self.max_spend {
            n - 1
        } else {
            argmin_first((0..n as u32).map(|m| self.costs.estimate(model, s, m)))
                .expect("a = 0 is always feasible")
                .0
        };
        model.decision_for_servers(s, m as u32)
    }
}

/// Largest feasible power demand not above a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPolicy {
    pub level_units: u32,
}

impl Policy for FixedPolicy {
    fn name(&self) -> String {
        format!("fixed:{}u", self.level_units)
    }

    fn select(&mut self, model: &Model, s: &SystemState, _rng: &mut dyn RngCore) -> ControlDecision {
        self.greedy(model, s)
    }

    fn greedy(&self, model: &Model, s: &SystemState) -> ControlDecision {
        let limit = self.level_units.min(model.compute_budget(s));
        let m = model.action_grid().partition_point(|&a| a <= limit) - 1;
        model.decision_for_servers(s, m as u32)
    }
}

/// Replays a precomputed policy, e.g. the value-iteration optimum.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    pub table: PolicyTable,
}

impl Policy for TablePolicy {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn select(&mut self, model: &Model, s: &SystemState, _rng: &mut dyn RngCore) -> ControlDecision {
        self.greedy(model, s)
    }

    fn greedy(&self, _model: &Model, s: &SystemState) -> ControlDecision {
        *self.table.get(s)
    }
}

/// Policy selector as written on the command line:
/// `pds`, `qlearning`, `myopic`, `myopic-maxspend` or `fixed:<kW>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Pds,
    QLearning,
    Myopic { max_spend: bool },
    Fixed { kilowatts: f64 },
}

impl PolicyKind {
    pub fn build(&self, model: &Model) -> Box<dyn Policy> {
        match *self {
            PolicyKind::Pds => Box::new(PdsLearner::new(model)),
            PolicyKind::QLearning => Box::new(QLearner::new(model)),
            PolicyKind::Myopic { max_spend } => Box::new(MyopicPolicy::new(model, max_spend)),
            PolicyKind::Fixed { kilowatts } => Box::new(FixedPolicy {
                level_units: watts_to_units_floor(kilowatts * 1000.0, model.config().watts_per_unit()),
            }),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Pds => f.write_str("pds"),
            PolicyKind::QLearning => f.write_str("qlearning"),
            PolicyKind::Myopic { max_spend: false } => f.write_str("myopic"),
            PolicyKind::Myopic { max_spend: true } => f.write_str("myopic-maxspend"),
            PolicyKind::Fixed { kilowatts } => write!(f, "fixed:{kilowatts}"),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pds" => Ok(PolicyKind::Pds),
            "qlearning" | "q" => Ok(PolicyKind::QLearning),
            "myopic" => Ok(PolicyKind::Myopic { max_spend: false }),
            "myopic-maxspend" => Ok(PolicyKind::Myopic { max_spend: true }),
            _ => {
                let level = s.strip_prefix("fixed:").ok_or_else(|| {
                    Error::Parse(format!(
                        "unknown policy `{s}` (expected pds, qlearning, myopic, myopic-maxspend or fixed:<kW>)"
                    ))
                })?;
                let kilowatts: f64 = level
                    .parse()
                    .map_err(|_| Error::Parse(format!("fixed power `{level}` is not a number")))?;
                if !(kilowatts >= 0.0) || !kilowatts.is_finite() {
                    return Err(Error::Parse(format!("fixed power must be non-negative, got {level}")));
                }
                Ok(PolicyKind::Fixed { kilowatts })
            }
        }
    }
}
