//! Exact solution of the full MDP by value iteration, for when the dynamics
//! are known, plus checkers for the shape of the optimal value function and
//! policy.
//!
//! The Bellman operator is applied through the post-decision value function:
//! `V(s~) = E[C(s')]` is computed once per sweep (factored over green energy
//! and the three exogenous chains) and then `C(s) = min_a c(s,a) + delta V(pds(s,a))`.
//! This is the same operator as taking the expectation inside the minimum,
//! because the transition from the post-decision state does not depend on `a`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ExogenousState;
use crate::error::{Error, Result};
use crate::model::{argmin_first, ControlDecision, Model, StateSpace, SystemState};

pub const DEFAULT_STATE_CAP: usize = 5_000_000;
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// One real value per state of a [`StateSpace`]. Holds either normal-state
/// values `C(s)` or post-decision values `V(s~)` (battery axis = `b~`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub space: StateSpace,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm change of the last sweep that produced this table.
    pub final_delta: f64,
}

impl ValueTable {
    pub fn new(space: StateSpace, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), space.len(), "value table size");
        Self {
            space,
            values,
            iterations: 0,
            final_delta: 0.0,
        }
    }

    pub fn constant(space: StateSpace, value: f64) -> Self {
        Self::new(space, vec![value; space.len()])
    }

    pub fn get(&self, s: &SystemState) -> f64 {
        self.values[self.space.index(s)]
    }

    /// Values along the battery axis for one exogenous state.
    pub fn battery_slice(&self, x: ExogenousState) -> &[f64] {
        let l = self.space.battery_levels();
        let start = self.space.exo_index(x) * l;
        &self.values[start..start + l]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|`; errors if the tables index different spaces.
    pub fn sup_distance(&self, other: &ValueTable) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Decision per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub space: StateSpace,
    pub decisions: Vec<ControlDecision>,
}

impl PolicyTable {
    pub fn get(&self, s: &SystemState) -> &ControlDecision {
        &self.decisions[self.space.index(s)]
    }

    pub fn action(&self, s: &SystemState) -> u32 {
        self.get(s).power_demand
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Target sup-norm distance between the returned table and the fixed point.
    pub tol: f64,
    pub max_sweeps: usize,
    pub state_cap: usize,
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Expected one-slot cost and post-decision index for every feasible
/// (state, server count) pair, flattened state by state.
struct ActionCache {
    offsets: Vec<usize>,
    costs: Vec<f64>,
    post_index: Vec<usize>,
}

impl ActionCache {
    fn build(model: &Model) -> Self {
        let space = model.space();
        let mut offsets = Vec::with_capacity(space.len() + 1);
        let mut costs = Vec::new();
        let mut post_index = Vec::new();
        offsets.push(0);
        for s in space.states() {
            let exo_base = space.exo_index(s.exogenous()) * space.battery_levels();
            for m in 0..model.feasible_count(&s) as u32 {
                let a = model.action_grid()[m as usize];
                costs.push(model.expected_cost_for_servers(&s, m));
                post_index.push(exo_base + model.post_battery(&s, a) as usize);
            }
            offsets.push(costs.len());
        }
        Self {
            offsets,
            costs,
            post_index,
        }
    }

    fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// `(min value, argmin server count)` of the one-step lookahead at state `i`.
    fn greedy(&self, i: usize, discount: f64, post_values: &[f64]) -> (f64, usize) {
        let r = self.range(i);
        let q = self.costs[r.clone()]
            .iter()
            .zip(&self.post_index[r])
            .map(|(c, &p)| c + discount * post_values[p]);
        let (m, v) = argmin_first(q).expect("a = 0 is always feasible");
        (v, m)
    }
}

fn check_space(model: &Model, table: &ValueTable) -> Result<()> {
    if table.space != *model.space() {
        return Err(Error::ShapeMismatch(format!(
            "table indexes {:?}, model has {:?}",
            table.space,
            model.space()
        )));
    }
    Ok(())
}

/// Post-decision values `V(s~) = sum_{s'} P(s'|s~) C(s')` with
/// `b' = min(b~ + g, B)`.
pub fn pds_value(model: &Model, normal: &ValueTable) -> Result<ValueTable> {
    check_space(model, normal)?;
    Ok(ValueTable::new(
        *model.space(),
        post_decision_expectation(model, &normal.values),
    ))
}

fn post_decision_expectation(model: &Model, c: &[f64]) -> Vec<f64> {
    let space = model.space();
    let exo = model.exogenous();
    let (nw, ne, nh) = (space.n_workload, space.n_env, space.n_congestion);
    let n_exo = space.n_exogenous();
    let l = space.battery_levels();
    let cap = l - 1;

    // green arrival, for every environment the arrival may be drawn under
    let mut green = vec![0.0; ne * n_exo * l];
    for eg in 0..ne {
        let support: Vec<(usize, f64)> = exo
            .green_pmf(eg)
            .support()
            .map(|(k, p)| (k as usize, p))
            .collect();
        let block = &mut green[eg * n_exo * l..(eg + 1) * n_exo * l];
        for (x, out) in block.chunks_mut(l).enumerate() {
            let row = &c[x * l..(x + 1) * l];
            for (bt, o) in out.iter_mut().enumerate() {
                *o = support
                    .iter()
                    .map(|&(k, p)| p * row[(bt + k).min(cap)])
                    .sum();
            }
        }
    }

    // next workload: [eg][w][e'][h'][b]
    let inner = ne * nh * l;
    let mut by_workload = vec![0.0; ne * nw * inner];
    for eg in 0..ne {
        for w in 0..nw {
            let out = &mut by_workload[(eg * nw + w) * inner..(eg * nw + w + 1) * inner];
            for (w2, &p) in exo.workload[w].iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let src = &green[(eg * n_exo + w2 * ne * nh) * l..][..inner];
                for (o, v) in out.iter_mut().zip(src) {
                    *o += p * v;
                }
            }
        }
    }

    // next environment, with the green draw tied to the current one: [w][e][h'][b]
    let inner_h = nh * l;
    let mut by_env = vec![0.0; nw * ne * inner_h];
    for w in 0..nw {
        for e in 0..ne {
            let out = &mut by_env[(w * ne + e) * inner_h..(w * ne + e + 1) * inner_h];
            for (e2, &p) in exo.env[e].iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let src = &by_workload[(e * nw + w) * inner + e2 * inner_h..][..inner_h];
                for (o, v) in out.iter_mut().zip(src) {
                    *o += p * v;
                }
            }
        }
    }

    // next congestion: [w][e][h][b]
    let mut v = vec![0.0; space.len()];
    for w in 0..nw {
        for e in 0..ne {
            for h in 0..nh {
                let x = (w * ne + e) * nh + h;
                let out = &mut v[x * l..(x + 1) * l];
                for (h2, &p) in exo.congestion[h].iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let src = &by_env[((w * ne + e) * nh + h2) * l..][..l];
                    for (o, val) in out.iter_mut().zip(src) {
                        *o += p * val;
                    }
                }
            }
        }
    }
    v
}

fn policy_from(model: &Model, cache: &ActionCache, post: &[f64]) -> PolicyTable {
    let space = model.space();
    let decisions = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let (_, m) = cache.greedy(i, model.discount(), post);
            model.decision_for_servers(&space.state(i), m as u32)
        })
        .collect();
    PolicyTable {
        space: *space,
        decisions,
    }
}

/// Greedy policy with respect to a post-decision value table.
pub fn greedy_policy(model: &Model, post: &ValueTable) -> Result<PolicyTable> {
    check_space(model, post)?;
    let cache = ActionCache::build(model);
    Ok(policy_from(model, &cache, &post.values))
}

/// One application of the Bellman operator to `normal`.
pub fn bellman_update(model: &Model, normal: &ValueTable) -> Result<ValueTable> {
    check_space(model, normal)?;
    let cache = ActionCache::build(model);
    let post = post_decision_expectation(model, &normal.values);
    let values = (0..normal.values.len())
        .into_par_iter()
        .map(|i| cache.greedy(i, model.discount(), &post).0)
        .collect();
    Ok(ValueTable::new(*model.space(), values))
}

/// `max_s |T C(s) - C(s)|`.
pub fn bellman_residual(model: &Model, normal: &ValueTable) -> Result<f64> {
    bellman_update(model, normal)?.sup_distance(normal)
}

/// Solves the Bellman equations to sup-norm accuracy `tol`.
pub fn value_iteration(model: &Model, tol: f64) -> Result<(ValueTable, PolicyTable)> {
    value_iteration_with(model, SolveOptions::with_tol(tol))
}

pub fn value_iteration_with(
    model: &Model,
    opts: SolveOptions,
) -> Result<(ValueTable, PolicyTable)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Numeric(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let space = *model.space();
    if space.len() > opts.state_cap {
        return Err(Error::StateSpaceTooLarge {
            states: space.len(),
            cap: opts.state_cap,
        });
    }
    let discount = model.discount();
    let threshold = opts.tol * (1.0 - discount) / (2.0 * discount);
    let cache = ActionCache::build(model);

    let mut current = vec![0.0; space.len()];
    let mut delta = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        let post = post_decision_expectation(model, &current);
        let next: Vec<f64> = (0..space.len())
            .into_par_iter()
            .map(|i| cache.greedy(i, discount, &post).0)
            .collect();
        if let Some(i) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite value at {:?} in sweep {}",
                space.state(i),
                sweeps + 1
            )));
        }
        delta = next
            .iter()
            .zip(&current)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        current = next;
        sweeps += 1;
        if delta <= threshold {
            break;
        }
    }
    if delta > threshold {
        return Err(Error::Numeric(format!(
            "no convergence after {sweeps} sweeps (last change {delta:e})"
        )));
    }
    let post = post_decision_expectation(model, &current);
    let policy = policy_from(model, &cache, &post);
    let table = ValueTable {
        space,
        values: current,
        iterations: sweeps,
        final_delta: delta,
    };
    Ok((table, policy))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyViolation {
    pub exogenous: ExogenousState,
    pub lower_battery: u32,
    pub higher_battery: u32,
    pub lower_action: u32,
    pub higher_action: u32,
}

/// Every pair `b < b'` (same exogenous state) where the policy spends more at
/// the lower battery level.
pub fn check_monotone_policy(policy: &PolicyTable) -> Vec<PolicyViolation> {
    let space = policy.space;
    let l = space.battery_levels();
    let mut out = Vec::new();
    for x in space.exogenous_states() {
        let base = space.exo_index(x) * l;
        let actions: Vec<u32> = policy.decisions[base..base + l]
            .iter()
            .map(|d| d.power_demand)
            .collect();
        for (b, &lo) in actions.iter().enumerate() {
            for (b2, &hi) in actions.iter().enumerate().skip(b + 1) {
                if lo > hi {
                    out.push(PolicyViolation {
                        exogenous: x,
                        lower_battery: b as u32,
                        higher_battery: b2 as u32,
                        lower_action: lo,
                        higher_action: hi,
                    });
                }
            }
        }
    }
    out
}

pub const SHAPE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeViolation {
    pub exogenous: ExogenousState,
    /// `b` for a monotonicity violation `V(b+1) > V(b)`; the middle point for a
    /// convexity violation.
    pub battery: u32,
    /// Amount by which the inequality fails.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub monotonicity: Vec<ShapeViolation>,
    pub convexity: Vec<ShapeViolation>,
    /// Number of adjacent pairs examined.
    pub pairs: usize,
    /// Number of `(b-1, b, b+1)` triples examined.
    pub triples: usize,
}

impl ShapeReport {
    pub fn convexity_fraction(&self) -> f64 {
        if self.triples == 0 {
            0.0
        } else {
            self.convexity.len() as f64 / self.triples as f64
        }
    }

    pub fn max_convexity_magnitude(&self) -> f64 {
        self.convexity.iter().fold(0.0, |m, v| m.max(v.magnitude))
    }
}

/// Checks that values are non-increasing and midpoint-convex along battery.
pub fn check_value_shape(table: &ValueTable) -> ShapeReport {
    let space = table.space;
    let mut report = ShapeReport {
        monotonicity: Vec::new(),
        convexity: Vec::new(),
        pairs: 0,
        triples: 0,
    };
    for x in space.exogenous_states() {
        let v = table.battery_slice(x);
        for b in 0..v.len().saturating_sub(1) {
            report.pairs += 1;
            let rise = v[b + 1] - v[b];
            if rise > SHAPE_SLACK {
                report.monotonicity.push(ShapeViolation {
                    exogenous: x,
                    battery: b as u32,
                    magnitude: rise,
                });
            }
        }
        for b in 1..v.len().saturating_sub(1) {
            report.triples += 1;
            let gap = (v[b] - v[b - 1]) - (v[b + 1] - v[b]);
            if gap > SHAPE_SLACK {
                report.convexity.push(ShapeViolation {
                    exogenous: x,
                    battery: b as u32,
                    magnitude: gap,
                });
            }
        }
    }
    report
}
