//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Every threshold is pinned here as a named constant.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mec_core::config::ScenarioConfig;
use mec_core::dynamics::ExogenousState;
use mec_core::export::write_trace;
use mec_core::harness::{
    moving_average, relative_error, run, run_batch, summarize, SlotTrace, Simulation,
    DEFAULT_CHECKPOINTS,
};
use mec_core::learners::{CostEstimator, PdsLearner, Policy, PolicyKind, Transition};
use mec_core::model::{local_delay, offload_delay, Model, SystemState};
use mec_core::oracle::{
    bellman_residual, check_monotone_policy, check_value_shape, pds_value, value_iteration,
    PolicyTable, ValueTable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// 1: oracle self-consistency
const ORACLE_TOL: f64 = 1e-9;
const MAX_RESIDUAL: f64 = 1e-8;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
// 3: value shape
const MAX_CONVEX_FRACTION: f64 = 0.01;
const MAX_CONVEX_MAGNITUDE: f64 = 1e-6;
// 4: learner convergence
const CONVERGENCE_SLOTS: u64 = 200_000;
const MAX_RELATIVE_ERROR: f64 = 0.10;
const SMOOTHING_WINDOW: usize = 5;
const SMOOTHING_FROM: u64 = 10_000;
const LEARNER_BUDGET: Duration = Duration::from_secs(120);
const CONVERGENCE_SEED: u64 = 1;
// 5, 6: benchmark comparison
const COMPARE_SLOTS: u64 = 10_000;
const COMPARE_SEEDS: u64 = 10;
const MAX_BACKUP_SHARE: f64 = 0.25;
// 7: inner problem
const INNER_PAIRS: usize = 1_000;
const INNER_GRID_STEP: f64 = 0.01;
const INNER_MU_TOL: f64 = 0.02;
const INNER_COST_TOL: f64 = 1e-4;
// 8: factored cost estimate
const FACTORED_SEQUENCES: u64 = 100;
const FACTORED_LENGTH: usize = 1_000;
const FACTORED_TOL: f64 = 1e-12;
const FACTORED_CHECK_EVERY: usize = 10;
// 9: determinism
const DETERMINISM_SLOTS: u64 = 10_000;
const DETERMINISM_SEED: u64 = 7;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("[{}] {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

/// Battery bounds and backup flags over every slot of every run.
#[derive(Default)]
struct SafetyAudit {
    slots: u64,
    out_of_range: u64,
    flag_mismatch: u64,
}

impl SafetyAudit {
    fn check(&mut self, model: &Model, slot: &SlotTrace) {
        self.slots += 1;
        let cap = model.capacity();
        if slot.state.battery > cap || slot.next_battery > cap {
            self.out_of_range += 1;
        }
        let should_back_up = model.op_power_at(&slot.state) > slot.state.battery;
        if slot.backup != should_back_up || slot.cost.backup_invoked() != should_back_up {
            self.flag_mismatch += 1;
        }
    }
}

struct Oracle {
    model: Model,
    values: ValueTable,
    policy: PolicyTable,
    post: ValueTable,
}

fn criterion_1(report: &mut Report) -> Oracle {
    let model = Model::new(ScenarioConfig::small()).expect("small scenario is valid");
    let start = Instant::now();
    let (values, policy) = value_iteration(&model, ORACLE_TOL).expect("value iteration");
    let elapsed = start.elapsed();
    let residual = bellman_residual(&model, &values).expect("residual");
    let post = pds_value(&model, &values).expect("post-decision values");
    report.line(
        1,
        "oracle self-consistency",
        residual <= MAX_RESIDUAL && elapsed < ORACLE_BUDGET,
        format!(
            "{} states, {} sweeps, residual {residual:.2e} (<= {MAX_RESIDUAL:e}), {elapsed:.2?} (< {ORACLE_BUDGET:?})",
            model.space().len(),
            values.iterations
        ),
    );
    Oracle {
        model,
        values,
        policy,
        post,
    }
}

fn criterion_2(report: &mut Report, oracle: &Oracle) {
    let violations = check_monotone_policy(&oracle.policy);
    let affected: std::collections::BTreeSet<_> = violations
        .iter()
        .map(|v| (v.exogenous.workload_idx, v.exogenous.env_idx, v.exogenous.congestion_idx))
        .collect();
    let example = violations
        .first()
        .map(|v| {
            format!(
                "; e.g. {:?}: a({})={} > a({})={}",
                v.exogenous, v.lower_battery, v.lower_action, v.higher_battery, v.higher_action
            )
        })
        .unwrap_or_default();
    report.line(
        2,
        "monotone optimal policy",
        violations.is_empty(),
        format!(
            "{} violating pairs in {}/{} exogenous states (required 0){example}",
            violations.len(),
            affected.len(),
            oracle.model.space().n_exogenous()
        ),
    );
}

fn criterion_3(report: &mut Report, oracle: &Oracle) {
    let shape = check_value_shape(&oracle.post);
    let normal = check_value_shape(&oracle.values);
    let pass = shape.monotonicity.is_empty()
        && shape.convexity_fraction() <= MAX_CONVEX_FRACTION
        && shape.max_convexity_magnitude() <= MAX_CONVEX_MAGNITUDE;
    report.line(
        3,
        "value shape",
        pass,
        format!(
            "V*: {} monotonicity violations / {} pairs (required 0); convexity {}/{} triples = {:.2}% (<= {:.0}%), max gap {:.3e} (<= {MAX_CONVEX_MAGNITUDE:e}); C*: {} monotone, {:.2}% convex violations",
            shape.monotonicity.len(),
            shape.pairs,
            shape.convexity.len(),
            shape.triples,
            100.0 * shape.convexity_fraction(),
            100.0 * MAX_CONVEX_FRACTION,
            shape.max_convexity_magnitude(),
            normal.monotonicity.len(),
            100.0 * normal.convexity_fraction(),
        ),
    );
}

fn criterion_4(report: &mut Report, oracle: &Oracle, audit: &mut SafetyAudit) {
    let model = &oracle.model;
    let checkpoints: Vec<u64> = DEFAULT_CHECKPOINTS
        .iter()
        .copied()
        .filter(|&t| t <= CONVERGENCE_SLOTS)
        .collect();
    let start = Instant::now();
    let mut learner = PdsLearner::new(model);
    let mut sim = Simulation::new(model, CONVERGENCE_SEED);
    let mut curve = Vec::new();
    for &t in &checkpoints {
        while sim.t() < t {
            let slot = sim.step(&mut learner).expect("slot");
            audit.check(model, &slot);
        }
        let err = relative_error(&learner.post_values, &oracle.post).expect("same space");
        curve.push((t, err));
    }
    let elapsed = start.elapsed();
    let final_error = curve.last().map_or(f64::INFINITY, |p| p.1);
    let late: Vec<f64> = curve
        .iter()
        .filter(|(t, _)| *t >= SMOOTHING_FROM)
        .map(|p| p.1)
        .collect();
    let smoothed = moving_average(&late, SMOOTHING_WINDOW);
    let non_increasing = smoothed.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = curve.iter().map(|(t, e)| format!("{t}:{e:.3}")).collect();
    report.line(
        4,
        "learner convergence",
        final_error <= MAX_RELATIVE_ERROR && non_increasing && elapsed < LEARNER_BUDGET,
        format!(
            "error {final_error:.4} at t={CONVERGENCE_SLOTS} (<= {MAX_RELATIVE_ERROR}), smoothed tail non-increasing: {non_increasing}, {elapsed:.2?} (< {LEARNER_BUDGET:?}); curve [{}]",
            shown.join(" ")
        ),
    );
}

fn criteria_5_6(report: &mut Report, audit: &mut SafetyAudit) {
    let model = Model::new(ScenarioConfig::default()).expect("default scenario is valid");
    let kinds: Vec<PolicyKind> = ["pds", "qlearning", "myopic", "fixed:0.4", "fixed:1.0"]
        .iter()
        .map(|s| s.parse().expect("selector"))
        .collect();
    let seeds: Vec<u64> = (0..COMPARE_SEEDS).collect();
    let runs = run_batch(&model, &kinds, &seeds, COMPARE_SLOTS);
    for r in &runs {
        for slot in &r.output.as_ref().expect("benchmark run").trace {
            audit.check(&model, slot);
        }
    }
    let summary = summarize(&kinds, &runs);
    let cost = |i: usize| summary[i].mean_cost;
    let (pds, q, myopic, f04, f10) = (cost(0), cost(1), cost(2), cost(3), cost(4));
    report.line(
        5,
        "benchmark ordering",
        pds < q && pds < myopic && pds < f04 && pds <= f10,
        format!(
            "mean cost over {COMPARE_SEEDS} seeds x {COMPARE_SLOTS} slots: pds {pds:.4} < qlearning {q:.4}, < myopic {myopic:.4}, < fixed-0.4kW {f04:.4}, <= fixed-1.0kW {f10:.4}"
        ),
    );
    let share = |i: usize| summary[i].composition.backup;
    let (pds_share, myopic_share) = (share(0), share(2));
    report.line(
        6,
        "backup cost share",
        pds_share <= MAX_BACKUP_SHARE && pds_share < myopic_share,
        format!(
            "pds {:.2}% (<= {:.0}%) < myopic {:.2}%; qlearning {:.2}%",
            100.0 * pds_share,
            100.0 * MAX_BACKUP_SHARE,
            100.0 * myopic_share,
            100.0 * share(1)
        ),
    );
}

fn criterion_7(report: &mut Report) {
    let model = Model::new(ScenarioConfig::default()).expect("default scenario is valid");
    let config = model.config();
    let kappa = config.service_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_mu, mut worst_cost, mut beaten) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..INNER_PAIRS {
        let s = model.space().state(rng.random_range(0..model.space().len()));
        let n = model.feasible_count(&s);
        let a = model.action_grid()[rng.random_range(0..n)];
        let inner = model.inner_optimize(&s, a).expect("feasible");
        let (lambda, h, m) = (model.workload(&s), model.congestion(&s), inner.servers);
        let cost = |mu: f64| local_delay(m, mu, kappa).unwrap() + offload_delay(lambda, mu, h).unwrap();
        // every grid point of the closed interval [0, min(lambda, m kappa)]
        // that keeps the queue stable, endpoint included
        let cap = lambda.min(m as f64 * kappa);
        let mut grid: Vec<f64> = (0..)
            .map(|k| k as f64 * INNER_GRID_STEP)
            .take_while(|&x| x <= cap)
            .collect();
        grid.push(cap);
        let (best_mu, best_cost) = grid
            .into_iter()
            .filter(|&x| x < m as f64 * kappa || x == 0.0)
            .map(|x| (x, cost(x)))
            .fold((0.0, f64::INFINITY), |b, p| if p.1 < b.1 { p } else { b });
        let closed = inner.local_delay + inner.offload_delay;
        worst_mu = worst_mu.max((inner.local_work - best_mu).abs());
        worst_cost = worst_cost.max((closed - best_cost).abs());
        if closed > best_cost + 1e-12 {
            beaten += 1;
        }
    }
    report.line(
        7,
        "inner optimization vs grid search",
        worst_mu <= INNER_MU_TOL && worst_cost <= INNER_COST_TOL,
        format!(
            "{INNER_PAIRS} pairs: max |mu - grid| {worst_mu:.2e} (<= {INNER_MU_TOL}), max |cost - grid| {worst_cost:.2e} (<= {INNER_COST_TOL:e}); grid strictly better in {beaten}"
        ),
    );
}

fn random_transition(model: &Model, rng: &mut ChaCha8Rng) -> Transition {
    let space = model.space();
    let s = space.state(rng.random_range(0..space.len()));
    let m = rng.random_range(0..model.feasible_count(&s)) as u32;
    let decision = model.decision_for_servers(&s, m);
    let green = rng.random_range(0..=20);
    let cost = model.realized_cost(&s, decision.power_demand, green).expect("feasible");
    let next_exo: ExogenousState = space.exo_state(rng.random_range(0..space.n_exogenous()));
    let b = model.battery_transition(s.battery, model.workload(&s), decision.power_demand, green);
    Transition {
        state: s,
        decision,
        green,
        cost,
        next: SystemState::new(next_exo, b),
    }
}

fn criterion_8(report: &mut Report) {
    let model = Model::new(ScenarioConfig::small()).expect("small scenario is valid");
    let n_actions = model.action_grid().len() as u32;
    let mut worst = 0.0f64;
    let mut comparisons = 0u64;
    for seq in 0..FACTORED_SEQUENCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seq);
        let mut factored = PdsLearner::new(&model);
        let mut literal = PdsLearner::literal(&model);
        for step in 0..FACTORED_LENGTH {
            let t = random_transition(&model, &mut rng);
            factored.observe(&model, &t);
            literal.observe(&model, &t);
            if step % FACTORED_CHECK_EVERY == 0 || step + 1 == FACTORED_LENGTH {
                for s in model.space().states() {
                    for m in 0..n_actions {
                        let d = (factored.costs.estimate(&model, &s, m)
                            - literal.costs.estimate(&model, &s, m))
                        .abs();
                        worst = worst.max(d);
                        comparisons += 1;
                    }
                }
            }
        }
    }
    report.line(
        8,
        "factored cost estimate equals literal table",
        worst <= FACTORED_TOL,
        format!(
            "{FACTORED_SEQUENCES} sequences x {FACTORED_LENGTH} updates, {comparisons} comparisons, max |diff| {worst:.2e} (<= {FACTORED_TOL:e})"
        ),
    );
}

fn criterion_9(report: &mut Report, audit: &mut SafetyAudit) {
    let model = Model::new(ScenarioConfig::default()).expect("default scenario is valid");
    let dir = tempfile::tempdir().expect("temp dir");
    let mut identical = true;
    let mut sizes = Vec::new();
    for kind in ["pds", "qlearning", "myopic", "fixed:1.0"] {
        let kind: PolicyKind = kind.parse().expect("selector");
        let mut files = Vec::new();
        for attempt in 0..2 {
            let mut policy = kind.build(&model);
            let out = run(&model, policy.as_mut(), DETERMINISM_SLOTS, DETERMINISM_SEED).expect("run");
            for slot in &out.trace {
                audit.check(&model, slot);
            }
            let path = dir.path().join(format!("{}-{attempt}.csv", policy.name()));
            let file = std::fs::File::create(&path).expect("create trace");
            write_trace(&model, &out.trace, std::io::BufWriter::new(file)).expect("write trace");
            files.push(std::fs::read(&path).expect("read trace"));
        }
        identical &= files[0] == files[1];
        sizes.push(format!("{kind} {} B", files[0].len()));
    }
    report.line(
        9,
        "determinism",
        identical,
        format!(
            "two runs per policy, seed {DETERMINISM_SEED}, {DETERMINISM_SLOTS} slots, byte-identical: {identical} ({})",
            sizes.join(", ")
        ),
    );
}

fn criterion_10(report: &mut Report, audit: &SafetyAudit) {
    report.line(
        10,
        "battery safety",
        audit.out_of_range == 0 && audit.flag_mismatch == 0,
        format!(
            "{} slots audited: {} outside [0, B], {} backup flags inconsistent with d_op > b",
            audit.slots, audit.out_of_range, audit.flag_mismatch
        ),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: 0 };
    let mut audit = SafetyAudit::default();
    let oracle = criterion_1(&mut report);
    criterion_2(&mut report, &oracle);
    criterion_3(&mut report, &oracle);
    criterion_4(&mut report, &oracle, &mut audit);
    criteria_5_6(&mut report, &mut audit);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report, &mut audit);
    criterion_10(&mut report, &audit);
    println!("acceptance: {} of 10 criteria failed", report.failed);
    if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
