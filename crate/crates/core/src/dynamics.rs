//! Exogenous processes: the workload, environment and congestion Markov chains
//! and the green-energy arrival distribution conditioned on the environment.
//!
//! Sampling consumes a fixed, documented number of draws from the supplied
//! generator so that a seed pins down the whole exogenous sample path:
//! [`Exogenous::step`] takes three uniforms, [`GreenDistribution::sample`]
//! takes one standard normal.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

/// Row-stochastic transition matrix, `m[i][j] = P(next = j | current = i)`.
pub type Matrix = Vec<Vec<f64>>;

/// Lazy reflecting random walk on `n` states: stay with probability `stay`,
/// otherwise move to a neighbour (split evenly in the interior, all of it to
/// the single neighbour at either end).
pub fn default_chain(n: usize, stay: f64) -> Matrix {
    let mut m = vec![vec![0.0; n]; n];
    if n == 1 {
        m[0][0] = 1.0;
        return m;
    }
    let move_p = 1.0 - stay;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = stay;
        if i == 0 {
            row[1] = move_p;
        } else if i == n - 1 {
            row[n - 2] = move_p;
        } else {
            row[i - 1] = move_p / 2.0;
            row[i + 1] = move_p / 2.0;
        }
    }
    m
}

/// Inverse-CDF draw from one transition row with a single uniform.
fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the accumulated sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExogenousState {
    pub workload_idx: usize,
    pub env_idx: usize,
    pub congestion_idx: usize,
}

/// Distribution of the harvested energy in one slot, given the environment.
///
/// Harvested power is Normal(mean, std) watts, censored to `[0, mean + 6 std]`,
/// converted to energy units and rounded half-up to an integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenDistribution {
    pub mean_watts: f64,
    pub std_watts: f64,
    pub watts_per_unit: f64,
    /// `pmf[k]` is the probability of harvesting exactly `k` energy units.
    pub pmf: Vec<f64>,
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn watts_to_units_half_up(watts: f64, watts_per_unit: f64) -> u32 {
    (watts / watts_per_unit + 0.5).floor().max(0.0) as u32
}

impl GreenDistribution {
    pub fn new(mean_watts: f64, std_watts: f64, watts_per_unit: f64) -> Self {
        let cap = Self::cap_watts(mean_watts, std_watts);
        let top = watts_to_units_half_up(cap, watts_per_unit) as usize;
        let pmf = if std_watts == 0.0 {
            let mut pmf = vec![0.0; top + 1];
            pmf[top] = 1.0;
            pmf
        } else {
            // cdf of the censored variable at the upper edge of unit k
            let edge_cdf = |k: usize| {
                let w = (k as f64 + 0.5) * watts_per_unit;
                standard_normal_cdf((w - mean_watts) / std_watts)
            };
            let mut pmf = Vec::with_capacity(top + 1);
            let mut below = 0.0;
            for k in 0..top {
                let upper = edge_cdf(k);
                pmf.push(upper - below);
                below = upper;
            }
            pmf.push(1.0 - below);
            pmf
        };
        Self {
            mean_watts,
            std_watts,
            watts_per_unit,
            pmf,
        }
    }

    fn cap_watts(mean_watts: f64, std_watts: f64) -> f64 {
        (mean_watts + 6.0 * std_watts).max(0.0)
    }

    /// Draws one green energy arrival, in units. Consumes one standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let z: f64 = rng.sample(StandardNormal);
        let cap = Self::cap_watts(self.mean_watts, self.std_watts);
        let watts = (self.mean_watts + self.std_watts * z).clamp(0.0, cap);
        watts_to_units_half_up(watts, self.watts_per_unit)
    }

    pub fn max_units(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    /// Non-zero `(units, probability)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k as u32, p))
    }

    /// `E[max(demand - g, 0)]`.
    pub fn expected_deficit(&self, demand: u32) -> f64 {
        self.support()
            .map(|(g, p)| p * demand.saturating_sub(g) as f64)
            .sum()
    }
}

/// The three exogenous chains plus the conditional green distributions.
#[derive(Debug, Clone)]
pub struct Exogenous {
    pub workload: Matrix,
    pub env: Matrix,
    pub congestion: Matrix,
    pub green: Vec<GreenDistribution>,
}

impl Exogenous {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let wpu = config.watts_per_unit();
        let green = config
            .green_mean_watts
            .iter()
            .zip(&config.green_std_watts)
            .map(|(&m, &s)| GreenDistribution::new(m, s, wpu))
            .collect();
        Self {
            workload: config.transition_workload.clone(),
            env: config.transition_env.clone(),
            congestion: config.transition_congestion.clone(),
            green,
        }
    }

    /// Samples the next exogenous state. Always consumes exactly three uniforms,
    /// in the order workload, environment, congestion.
    pub fn step<R: Rng + ?Sized>(&self, x: ExogenousState, rng: &mut R) -> ExogenousState {
        let workload_idx = sample_row(&self.workload[x.workload_idx], rng);
        let env_idx = sample_row(&self.env[x.env_idx], rng);
        let congestion_idx = sample_row(&self.congestion[x.congestion_idx], rng);
        ExogenousState {
            workload_idx,
            env_idx,
            congestion_idx,
        }
    }

    pub fn sample_green<R: Rng + ?Sized>(&self, env_idx: usize, rng: &mut R) -> u32 {
        self.green[env_idx].sample(rng)
    }

    pub fn green_pmf(&self, env_idx: usize) -> &GreenDistribution {
        &self.green[env_idx]
    }

    /// `P(next | current)` for the joint exogenous chain.
    pub fn transition_prob(&self, from: ExogenousState, to: ExogenousState) -> f64 {
        self.workload[from.workload_idx][to.workload_idx]
            * self.env[from.env_idx][to.env_idx]
            * self.congestion[from.congestion_idx][to.congestion_idx]
    }
}
