//! CSV and JSON artifacts: slot traces, run metrics, value and policy tables.
//!
//! Floats are written in shortest round-trip form, so a trace read back
//! reproduces the original numbers exactly and
//! [`metrics_from_trace`] recomputes the run's metrics bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::{MetricsAccumulator, OffloadMapRow, PolicyMapRow, RunMetrics, SlotTrace};
use crate::model::{CostBreakdown, Model};
use crate::oracle::{PolicyTable, ValueTable};

pub const TRACE_COLUMNS: [&str; 17] = [
    "t", "lambda", "e", "h", "b", "a", "m", "mu", "nu", "g", "c_wi", "c_lo", "c_off", "c_bak",
    "c_batt", "total", "b_next",
];

/// One trace row. `e` is the environment label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub lambda: f64,
    pub e: String,
    pub h: f64,
    pub b: u32,
    pub a: u32,
    pub m: u32,
    pub mu: f64,
    pub nu: f64,
    pub g: u32,
    pub c_wi: f64,
    pub c_lo: f64,
    pub c_off: f64,
    pub c_bak: f64,
    pub c_batt: f64,
    pub total: f64,
    pub b_next: u32,
}

impl TraceRecord {
    pub fn from_slot(model: &Model, slot: &SlotTrace) -> Self {
        let s = &slot.state;
        let c = &slot.cost;
        Self {
            t: slot.t,
            lambda: model.workload(s),
            e: model.config().env_labels[s.env_idx].clone(),
            h: model.congestion(s),
            b: s.battery,
            a: slot.decision.power_demand,
            m: slot.decision.servers,
            mu: slot.decision.local_work,
            nu: slot.decision.offloaded,
            g: slot.green,
            c_wi: c.wireless_delay,
            c_lo: c.local_delay,
            c_off: c.offload_delay,
            c_bak: c.backup_cost,
            c_batt: c.depreciation,
            total: c.total,
            b_next: slot.next_battery,
        }
    }

    pub fn cost(&self) -> CostBreakdown {
        CostBreakdown {
            wireless_delay: self.c_wi,
            local_delay: self.c_lo,
            offload_delay: self.c_off,
            backup_cost: self.c_bak,
            depreciation: self.c_batt,
            utilization: 0.0,
            total: self.total,
        }
    }
}

pub fn write_trace<W: Write>(model: &Model, trace: &[SlotTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for slot in trace {
        w.serialize(TraceRecord::from_slot(model, slot))?;
    }
    if trace.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace, rejecting files whose header is not exactly
/// [`TRACE_COLUMNS`].
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(crate::Error::Parse(format!(
            "trace header {:?} does not match {:?}",
            header.iter().collect::<Vec<_>>(),
            TRACE_COLUMNS
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Recomputes run metrics from trace rows.
pub fn metrics_from_trace(
    records: &[TraceRecord],
    capacity: u32,
    policy: &str,
    seed: u64,
) -> Result<RunMetrics> {
    let mut acc = MetricsAccumulator::new(capacity);
    for r in records {
        acc.push(r.b, &r.cost())?;
    }
    Ok(acc.finish(policy, seed))
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRecord {
    pub lambda: f64,
    pub e: String,
    pub h: f64,
    pub b: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub lambda: f64,
    pub e: String,
    pub h: f64,
    pub b: u32,
    pub action: u32,
}

/// Writes a value table with columns `lambda,e,h,b,value`; for a
/// post-decision table `b` is the post-decision battery level.
pub fn write_values<W: Write>(model: &Model, table: &ValueTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (s, &value) in table.space.states().zip(&table.values) {
        w.serialize(ValueRecord {
            lambda: model.workload(&s),
            e: model.config().env_labels[s.env_idx].clone(),
            h: model.congestion(&s),
            b: s.battery,
            value,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a policy with columns `lambda,e,h,b,action`.
pub fn write_policy<W: Write>(model: &Model, policy: &PolicyTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (s, d) in policy.space.states().zip(&policy.decisions) {
        w.serialize(ActionRecord {
            lambda: model.workload(&s),
            e: model.config().env_labels[s.env_idx].clone(),
            h: model.congestion(&s),
            b: s.battery,
            action: d.power_demand,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_battery_slice<W: Write>(rows: &[PolicyMapRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn write_offload_map<W: Write>(rows: &[OffloadMapRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
