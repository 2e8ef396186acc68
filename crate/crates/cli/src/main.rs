//! `mec-sim`: run, compare and inspect edge-site controllers.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime abort.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mec_core::export::{
    write_json, write_offload_map, write_policy, write_rows, write_trace, write_values,
};
use mec_core::harness::{
    greedy_table, offload_map, run_batch, summarize, BatchRun, OffloadMapRow, PolicySummary,
    Simulation,
};
use mec_core::learners::PolicyKind;
use mec_core::oracle::{
    bellman_residual, check_monotone_policy, check_value_shape, pds_value, value_iteration,
};
use mec_core::{load_config, Error, Model, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mec-sim", version, about = "Offloading and autoscaling at an energy-harvesting edge site")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy for each seed and write its traces and metrics.
    Run(Common),
    /// Run several policies over the same seeds and summarize them.
    Compare(Common),
    /// Solve the scenario exactly and write C*, V* and the optimal policy.
    Oracle(Common),
    /// Train a policy, then write its greedy decisions and value estimates.
    ExportPolicy(Common),
    /// Sweep the fixed-power level (plus any `--policy` references).
    Sweep(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); the default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pds | qlearning | myopic | myopic-maxspend | fixed | fixed:<kW>; repeatable.
    #[arg(long = "policy", value_delimiter = ',')]
    policies: Vec<String>,
    /// Slots per run.
    #[arg(long, default_value_t = 10_000)]
    slots: u64,
    /// Seeds as a list (`1,2,3`) or half-open range (`0..10`); the config seed when omitted.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Level(s) for the fixed-power policy, kW.
    #[arg(long = "fixed-kw", value_delimiter = ',')]
    fixed_kw: Vec<f64>,
    /// Stopping tolerance of value iteration (sup-norm distance to C*).
    #[arg(long = "oracle-tol", default_value_t = 1e-8)]
    oracle_tol: f64,
    /// Make `myopic` spend all available battery energy.
    #[arg(long = "myopic-maxspend")]
    myopic_maxspend: bool,
}

/// Failure with the exit code it maps to.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. } | Error::Parse(_) => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

struct Prepared {
    model: Model,
    kinds: Vec<PolicyKind>,
    seeds: Vec<u64>,
    args: Common,
}

fn parse_seeds(text: &str) -> Outcome<Vec<u64>> {
    let bad = || usage(format!("--seeds `{text}`: expected `1,2,3` or `start..end`"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn resolve_policy(text: &str, config: &ScenarioConfig, args: &Common) -> Outcome<PolicyKind> {
    let text = text.trim();
    let kind = match text {
        "fixed" => {
            let kilowatts = match args.fixed_kw.as_slice() {
                [] => config.learning.fixed_power_units as f64 * config.watts_per_unit() / 1000.0,
                [kw] => *kw,
                _ => return Err(usage("`--policy fixed` takes a single --fixed-kw level")),
            };
            format!("fixed:{kilowatts}").parse()?
        }
        other => other.parse()?,
    };
    Ok(match kind {
        PolicyKind::Myopic { max_spend: false } if args.myopic_maxspend => {
            PolicyKind::Myopic { max_spend: true }
        }
        k => k,
    })
}

fn prepare(args: Common, default_policies: &[&str]) -> Outcome<Prepared> {
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    let seeds = match &args.seeds {
        Some(text) => parse_seeds(text)?,
        None => vec![config.seed],
    };
    if args.slots == 0 {
        return Err(usage("--slots must be at least 1"));
    }
    let selectors: Vec<String> = if args.policies.is_empty() {
        default_policies.iter().map(|s| s.to_string()).collect()
    } else {
        args.policies.clone()
    };
    let kinds = selectors
        .iter()
        .map(|s| resolve_policy(s, &config, &args))
        .collect::<Outcome<Vec<_>>>()?;
    let model = Model::new(config)?;
    Ok(Prepared {
        model,
        kinds,
        seeds,
        args,
    })
}

fn file_tag(kind: &PolicyKind) -> String {
    kind.to_string().replace(':', "-")
}

fn create(dir: &Path, name: &str) -> Outcome<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::Runtime)?;
    Ok(BufWriter::new(file))
}

fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::Runtime)
}

/// Writes every successful run's metrics; returns the first failure, if any.
fn write_run_metrics(dir: &Path, runs: &[BatchRun]) -> Outcome<Option<String>> {
    let mut first_error = None;
    for r in runs {
        match &r.output {
            Ok(out) => {
                let name = format!("metrics_{}_seed{}.json", file_tag(&r.kind), r.seed);
                write_json(&out.metrics, create(dir, &name)?)?;
            }
            Err(e) => {
                eprintln!("run {} seed {} aborted: {e}", r.kind, r.seed);
                first_error.get_or_insert_with(|| format!("{} seed {}: {e}", r.kind, r.seed));
            }
        }
    }
    Ok(first_error)
}

fn print_summaries(summaries: &[PolicySummary]) {
    println!(
        "{:<18} {:>5} {:>10} {:>9} {:>8} {:>8} {:>8}",
        "policy", "runs", "mean_cost", "std", "delay", "wear", "backup"
    );
    for s in summaries {
        println!(
            "{:<18} {:>5} {:>10.4} {:>9.4} {:>7.2}% {:>7.2}% {:>7.2}%",
            s.policy,
            s.runs,
            s.mean_cost,
            s.std_cost,
            100.0 * s.composition.delay,
            100.0 * s.composition.depreciation,
            100.0 * s.composition.backup
        );
    }
}

fn cmd_run(ctx: Prepared) -> Outcome {
    let [kind] = ctx.kinds.as_slice() else {
        return Err(usage("`run` takes exactly one --policy"));
    };
    let runs = run_batch(&ctx.model, &[*kind], &ctx.seeds, ctx.args.slots);
    let dir = &ctx.args.out;
    ensure_dir(dir)?;
    for r in &runs {
        if let Ok(out) = &r.output {
            let name = format!("trace_{}_seed{}.csv", file_tag(kind), r.seed);
            write_trace(&ctx.model, &out.trace, create(dir, &name)?)?;
        }
    }
    let failure = write_run_metrics(dir, &runs)?;
    print_summaries(&summarize(&ctx.kinds, &runs));
    match failure {
        Some(msg) => Err(runtime(anyhow!(msg))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct CompareReport<'a> {
    slots: u64,
    seeds: &'a [u64],
    summaries: &'a [PolicySummary],
    failures: Vec<String>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    policy: &'a str,
    runs: usize,
    mean_cost: f64,
    std_cost: f64,
    delay_share: f64,
    depreciation_share: f64,
    backup_share: f64,
}

fn summary_rows(summaries: &[PolicySummary]) -> Vec<SummaryRow<'_>> {
    summaries
        .iter()
        .map(|s| SummaryRow {
            policy: &s.policy,
            runs: s.runs,
            mean_cost: s.mean_cost,
            std_cost: s.std_cost,
            delay_share: s.composition.delay,
            depreciation_share: s.composition.depreciation,
            backup_share: s.composition.backup,
        })
        .collect()
}

fn cmd_compare(ctx: Prepared, report_name: &str) -> Outcome {
    let runs = run_batch(&ctx.model, &ctx.kinds, &ctx.seeds, ctx.args.slots);
    let summaries = summarize(&ctx.kinds, &runs);
    let dir = &ctx.args.out;
    ensure_dir(dir)?;
    let failure = write_run_metrics(dir, &runs)?;
    let failures = runs
        .iter()
        .filter_map(|r| r.output.as_ref().err().map(|e| format!("{} seed {}: {e}", r.kind, r.seed)))
        .collect();
    write_json(
        &CompareReport {
            slots: ctx.args.slots,
            seeds: &ctx.seeds,
            summaries: &summaries,
            failures,
        },
        create(dir, &format!("{report_name}.json"))?,
    )?;
    write_rows(&summary_rows(&summaries), create(dir, &format!("{report_name}.csv"))?)?;
    print_summaries(&summaries);
    match failure {
        Some(msg) => Err(runtime(anyhow!(msg))),
        None => Ok(()),
    }
}

fn cmd_sweep(mut ctx: Prepared) -> Outcome {
    let levels = if ctx.args.fixed_kw.is_empty() {
        vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.2, 1.5, 1.8, 2.25]
    } else {
        ctx.args.fixed_kw.clone()
    };
    if let Some(kw) = levels.iter().find(|kw| !(**kw >= 0.0 && kw.is_finite())) {
        return Err(usage(format!("--fixed-kw {kw} is not a non-negative power")));
    }
    let mut kinds: Vec<PolicyKind> = levels.iter().map(|&kilowatts| PolicyKind::Fixed { kilowatts }).collect();
    if !ctx.args.policies.is_empty() {
        kinds.extend(ctx.kinds.iter().copied());
    }
    ctx.kinds = kinds;
    cmd_compare(ctx, "sweep")
}

#[derive(Serialize)]
struct OracleReport {
    states: usize,
    sweeps: usize,
    final_delta: f64,
    bellman_residual: f64,
    tolerance: f64,
    monotone_policy_violating_pairs: usize,
    value_monotonicity_violations: usize,
    value_convexity_violations: usize,
    value_convexity_triples: usize,
    value_max_convexity_gap: f64,
}

fn cmd_oracle(ctx: Prepared) -> Outcome {
    let tol = ctx.args.oracle_tol;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(usage(format!("--oracle-tol must be positive, got {tol}")));
    }
    let model = &ctx.model;
    let (values, policy) = value_iteration(model, tol)?;
    let post = pds_value(model, &values)?;
    let residual = bellman_residual(model, &values)?;
    let shape = check_value_shape(&post);
    let report = OracleReport {
        states: model.space().len(),
        sweeps: values.iterations,
        final_delta: values.final_delta,
        bellman_residual: residual,
        tolerance: tol,
        monotone_policy_violating_pairs: check_monotone_policy(&policy).len(),
        value_monotonicity_violations: shape.monotonicity.len(),
        value_convexity_violations: shape.convexity.len(),
        value_convexity_triples: shape.triples,
        value_max_convexity_gap: shape.max_convexity_magnitude(),
    };
    let dir = &ctx.args.out;
    ensure_dir(dir)?;
    write_values(model, &values, create(dir, "oracle_values.csv")?)?;
    write_values(model, &post, create(dir, "oracle_post_values.csv")?)?;
    write_policy(model, &policy, create(dir, "oracle_policy.csv")?)?;
    write_json(&report, create(dir, "oracle.json")?)?;
    println!(
        "{} states, {} sweeps, residual {:.3e}; policy monotonicity violations {}; V* convexity violations {}/{}",
        report.states,
        report.sweeps,
        report.bellman_residual,
        report.monotone_policy_violating_pairs,
        report.value_convexity_violations,
        report.value_convexity_triples
    );
    Ok(())
}

fn cmd_export_policy(ctx: Prepared) -> Outcome {
    let model = &ctx.model;
    let seed = ctx.seeds[0];
    let mut outputs = Vec::new();
    for kind in &ctx.kinds {
        let mut policy = kind.build(model);
        let mut sim = Simulation::new(model, seed);
        for _ in 0..ctx.args.slots {
            sim.step(policy.as_mut())?;
        }
        let table = greedy_table(model, policy.as_ref());
        let values = policy.post_value_estimate(model)?;
        outputs.push((kind, table, values));
    }
    let offload: Vec<OffloadMapRow> = (0..=model.config().max_servers)
        .map(|m| offload_map(model, m))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let dir = &ctx.args.out;
    ensure_dir(dir)?;
    for (kind, table, values) in &outputs {
        let tag = file_tag(kind);
        write_policy(model, table, create(dir, &format!("policy_{tag}.csv"))?)?;
        if let Some(v) = values {
            write_values(model, v, create(dir, &format!("values_{tag}.csv"))?)?;
        }
        let violations = check_monotone_policy(table).len();
        println!("{kind}: trained {} slots (seed {seed}), {violations} monotonicity violations", ctx.args.slots);
    }
    write_offload_map(&offload, create(dir, "offload_map.csv")?)?;
    Ok(())
}

const COMPARE_DEFAULT: [&str; 5] = ["pds", "qlearning", "myopic", "fixed:1.0", "fixed:0.4"];

fn dispatch(cli: Cli) -> Outcome {
    match cli.command {
        Command::Run(a) => cmd_run(prepare(a, &["pds"])?),
        Command::Compare(a) => {
            let ctx = prepare(a, &COMPARE_DEFAULT)?;
            cmd_compare(ctx, "compare")
        }
        Command::Oracle(a) => cmd_oracle(prepare(a, &[])?),
        Command::ExportPolicy(a) => cmd_export_policy(prepare(a, &["pds"])?),
        Command::Sweep(a) => cmd_sweep(prepare(a, &[])?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
