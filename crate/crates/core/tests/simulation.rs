//! Runner invariants: energy accounting, backup flags, determinism, maps.

use mec_core::config::ScenarioConfig;
use mec_core::dynamics::ExogenousState;
use mec_core::export::write_trace;
use mec_core::harness::{
    battery_slice, offload_map, run, run_batch, summarize, RunOutput,
};
use mec_core::learners::{FixedPolicy, PolicyKind};
use mec_core::model::Model;
use mec_core::oracle::value_iteration;

fn kinds() -> Vec<PolicyKind> {
    ["pds", "qlearning", "myopic", "myopic-maxspend", "fixed:0.4", "fixed:1.0"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn check_accounting(model: &Model, out: &RunOutput) {
    let cap = model.capacity() as i64;
    for (i, slot) in out.trace.iter().enumerate() {
        let s = &slot.state;
        let b = s.battery as i64;
        let d_op = model.op_power_at(s) as i64;
        let a = slot.decision.power_demand as i64;
        let g = slot.green as i64;
        assert!(b <= cap && (slot.next_battery as i64) <= cap);
        assert_eq!(slot.backup, d_op > b);
        assert_eq!(slot.cost.backup_invoked(), slot.backup);
        if slot.backup {
            assert_eq!(a, 0);
        } else {
            assert!(a <= b - d_op);
        }
        let flow = if slot.backup { b + g } else { b - d_op - a + g };
        if slot.clipped {
            assert_ne!(flow, slot.next_battery as i64);
            assert_eq!(slot.next_battery as i64, flow.clamp(0, cap));
        } else {
            assert_eq!(slot.next_battery as i64, flow);
        }
        if let Some(next) = out.trace.get(i + 1) {
            assert_eq!(next.state.battery, slot.next_battery);
        }
    }
}

#[test]
fn energy_is_accounted_for_in_every_slot() {
    let model = Model::new(ScenarioConfig::default()).unwrap();
    for r in run_batch(&model, &kinds(), &[0, 1], 3_000) {
        check_accounting(&model, &r.output.unwrap());
    }
    let mut c = ScenarioConfig::small();
    c.initial_battery = Some(0);
    let model = Model::new(c).unwrap();
    for r in run_batch(&model, &kinds(), &[3], 3_000) {
        let out = r.output.unwrap();
        assert!(out.trace[0].backup);
        check_accounting(&model, &out);
    }
}

#[test]
fn identical_inputs_give_identical_trace_bytes() {
    let model = Model::new(ScenarioConfig::default()).unwrap();
    for kind in kinds() {
        let bytes = || {
            let mut p = kind.build(&model);
            let out = run(&model, p.as_mut(), 2_000, 17).unwrap();
            let mut buf = Vec::new();
            write_trace(&model, &out.trace, &mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(), bytes(), "{kind}");
    }
}

#[test]
fn policies_share_the_environment_path() {
    let model = Model::new(ScenarioConfig::default()).unwrap();
    let runs = run_batch(&model, &kinds(), &[5], 1_000);
    let reference: Vec<_> = runs[0].output.as_ref().unwrap().trace.iter().map(|s| (s.state.exogenous(), s.green)).collect();
    for r in &runs[1..] {
        let path: Vec<_> = r.output.as_ref().unwrap().trace.iter().map(|s| (s.state.exogenous(), s.green)).collect();
        assert_eq!(path, reference, "{}", r.kind);
    }
}

#[test]
fn single_run_summary_equals_its_metrics() {
    let model = Model::new(ScenarioConfig::small()).unwrap();
    let kinds = vec![PolicyKind::Pds];
    let runs = run_batch(&model, &kinds, &[9], 500);
    let summary = &summarize(&kinds, &runs)[0];
    let m = &runs[0].output.as_ref().unwrap().metrics;
    assert_eq!(summary.mean_cost, m.time_average_cost);
    assert_eq!(summary.std_cost, 0.0);
    assert_eq!(summary.composition, m.composition);
    assert_eq!(summary.histogram, m.histogram);
}

#[test]
fn backup_start_costs_the_same_for_every_policy() {
    let mut c = ScenarioConfig::default();
    c.initial_battery = Some(3);
    let model = Model::new(c).unwrap();
    let runs = run_batch(&model, &kinds(), &[0], 1);
    let first = runs[0].output.as_ref().unwrap().metrics.time_average_cost;
    for r in &runs {
        assert_eq!(r.output.as_ref().unwrap().metrics.time_average_cost, first);
    }
}

#[test]
fn offload_map_saturates_in_workload() {
    let model = Model::new(ScenarioConfig::default()).unwrap();
    let rows = offload_map(&model, 4).unwrap();
    let n_h = model.config().congestion_levels.len();
    for w in 0..model.config().workload_levels.len() {
        let by_h = &rows[w * n_h..(w + 1) * n_h];
        assert!(by_h.windows(2).all(|p| p[1].mu >= p[0].mu));
    }
    for h in 0..n_h {
        let by_lambda: Vec<f64> = rows.iter().skip(h).step_by(n_h).map(|r| r.mu).collect();
        assert!(by_lambda.windows(2).all(|p| p[1] >= p[0]));
        // capped at 4 kappa - sqrt(4 kappa / h) once the workload exceeds it
        let h_val = model.config().congestion_levels[h];
        let ceiling = 80.0 - (80.0 / h_val).sqrt();
        assert!((by_lambda.last().unwrap() - ceiling).abs() < 1e-9);
    }
    assert!(offload_map(&model, 16).is_err());
}

#[test]
fn zero_capacity_battery_gives_one_row() {
    let mut c = ScenarioConfig::small();
    c.battery_capacity_units = 0;
    c.static_power_units = 0;
    let model = Model::new(c).unwrap();
    let (_, policy) = value_iteration(&model, 1e-8).unwrap();
    let x = ExogenousState { workload_idx: 1, env_idx: 1, congestion_idx: 1 };
    let rows = battery_slice(&model, &policy, x);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].a, 0);
}

#[test]
fn fixed_policy_never_overdraws() {
    let model = Model::new(ScenarioConfig::default()).unwrap();
    let out = run(&model, &mut FixedPolicy { level_units: 45 }, 5_000, 4).unwrap();
    check_accounting(&model, &out);
}
