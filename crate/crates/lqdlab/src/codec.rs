//! Canonical file formats.
//!
//! Encoders are byte-stable: fixed key order, integer-only numbers in
//! instance and trace files, shortest-round-trip floats elsewhere. Decoders
//! validate shape and ranges and report the JSON pointer of the offending
//! element.
//!
//! - Instance: `{"buffer_capacity": M, "arrivals": [{"step","queue","count"}]}`
//! - Trace: JSONL, one record per step:
//!   `{"step": t, "sizes": {"q": n, ...}, "transmit": [q...], "drops": [...]}`
//! - Schedule: `{"throughput", "certified", "transmit": [{"packet","queue","arrival_step","step"}]}`

use serde_json::Value;
use thiserror::Error;

use crate::ledger::AnalysisLedger;
use crate::opt::{OptSchedule, TransmitRecord};
use crate::switch::{
    build_instance, ArrivalEvent, DropKind, DropRecord, Instance, StepRecord, Trace,
};
use crate::verify::VerificationReport;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("instance validation: {0}")]
    Validation(#[from] crate::switch::SwitchError),
}

fn schema_err<T>(pointer: &str, message: impl Into<String>) -> Result<T, CodecError> {
    Err(CodecError::Schema { pointer: pointer.to_string(), message: message.into() })
}

fn get_u32(v: &Value, pointer: &str) -> Result<u32, CodecError> {
    match v.as_u64() {
        Some(x) if x <= u32::MAX as u64 => Ok(x as u32),
        Some(_) => schema_err(pointer, "value out of range"),
        None => schema_err(pointer, format!("expected a non-negative integer, got {v}")),
    }
}

fn get_field<'a>(v: &'a Value, key: &str, pointer: &str) -> Result<&'a Value, CodecError> {
    v.get(key)
        .ok_or(())
        .or_else(|_| schema_err(&format!("{pointer}/{key}"), "missing field"))
}

// ── Instance ────────────────────────────────────────────────────────────────

pub fn encode_instance(instance: &Instance) -> String {
    let mut out = String::from("{\"buffer_capacity\":");
    out.push_str(&instance.buffer_capacity().to_string());
    out.push_str(",\"arrivals\":[");
    for (i, e) in instance.arrivals().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"step\":{},\"queue\":{},\"count\":{}}}",
            e.step, e.queue, e.count
        ));
    }
    out.push_str("]}");
    out
}

pub fn decode_instance(text: &str) -> Result<Instance, CodecError> {
    let v: Value = serde_json::from_str(text)?;
    if !v.is_object() {
        return schema_err("", "expected an object");
    }
    let capacity = get_u32(get_field(&v, "buffer_capacity", "")?, "/buffer_capacity")?;
    let arrivals = get_field(&v, "arrivals", "")?;
    let arr = match arrivals.as_array() {
        Some(a) => a,
        None => return schema_err("/arrivals", "expected an array"),
    };
    let mut events = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let ptr = format!("/arrivals/{i}");
        let step = get_u32(get_field(item, "step", &ptr)?, &format!("{ptr}/step"))?;
        let queue = get_u32(get_field(item, "queue", &ptr)?, &format!("{ptr}/queue"))?;
        let count = get_u32(get_field(item, "count", &ptr)?, &format!("{ptr}/count"))?;
        if count == 0 {
            return schema_err(&format!("{ptr}/count"), "count must be positive");
        }
        events.push(ArrivalEvent { step, queue, count });
    }
    Ok(build_instance(capacity, &events)?)
}

// ── Trace ───────────────────────────────────────────────────────────────────

fn kind_str(kind: DropKind) -> &'static str {
    match kind {
        DropKind::Rejected => "rejected",
        DropKind::Preempted => "preempted",
    }
}

pub fn encode_trace_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for rec in &trace.steps {
        out.push_str(&format!("{{\"step\":{},\"sizes\":{{", rec.step));
        for (q, s) in rec.sizes.iter().enumerate() {
            if q > 0 {
                out.push(',');
            }
            out.push_str(&format!("\"{q}\":{s}"));
        }
        out.push_str("},\"transmit\":[");
        for (i, q) in rec.transmit.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&q.to_string());
        }
        out.push_str("],\"drops\":[");
        for (i, d) in rec.drops.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!(
                "{{\"queue\":{},\"count\":{},\"kind\":\"{}\"}}",
                d.queue,
                d.count,
                kind_str(d.kind)
            ));
        }
        out.push_str("]}\n");
    }
    out
}

pub fn decode_trace_jsonl(
    text: &str,
    algorithm: &str,
    instance: &Instance,
) -> Result<Trace, CodecError> {
    let n = instance.queue_count() as usize;
    let mut steps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ptr = format!("/line-{lineno}");
        let v: Value = serde_json::from_str(line)?;
        let step = get_u32(get_field(&v, "step", &ptr)?, &format!("{ptr}/step"))?;
        let sizes_v = get_field(&v, "sizes", &ptr)?;
        let map = match sizes_v.as_object() {
            Some(m) => m,
            None => return schema_err(&format!("{ptr}/sizes"), "expected an object"),
        };
        let mut sizes = vec![0u32; n];
        for (k, val) in map {
            let q: usize = match k.parse() {
                Ok(q) => q,
                Err(_) => return schema_err(&format!("{ptr}/sizes/{k}"), "non-numeric queue id"),
            };
            if q >= n {
                return schema_err(&format!("{ptr}/sizes/{k}"), "queue id out of range");
            }
            sizes[q] = get_u32(val, &format!("{ptr}/sizes/{k}"))?;
        }
        let transmit_v = get_field(&v, "transmit", &ptr)?;
        let mut transmit = Vec::new();
        for (i, t) in transmit_v
            .as_array()
            .map_or_else(|| schema_err(&format!("{ptr}/transmit"), "expected an array"), Ok)?
            .iter()
            .enumerate()
        {
            transmit.push(get_u32(t, &format!("{ptr}/transmit/{i}"))?);
        }
        let drops_v = get_field(&v, "drops", &ptr)?;
        let mut drops = Vec::new();
        for (i, d) in drops_v
            .as_array()
            .map_or_else(|| schema_err(&format!("{ptr}/drops"), "expected an array"), Ok)?
            .iter()
            .enumerate()
        {
            let dptr = format!("{ptr}/drops/{i}");
            let queue = get_u32(get_field(d, "queue", &dptr)?, &format!("{dptr}/queue"))?;
            let count = get_u32(get_field(d, "count", &dptr)?, &format!("{dptr}/count"))?;
            let kind = match get_field(d, "kind", &dptr)?.as_str() {
                Some("rejected") => DropKind::Rejected,
                Some("preempted") => DropKind::Preempted,
                _ => return schema_err(&format!("{dptr}/kind"), "expected rejected|preempted"),
            };
            drops.push(DropRecord { queue, count, kind });
        }
        steps.push(StepRecord { step, sizes, transmit, drops });
    }
    Ok(Trace {
        algorithm: algorithm.to_string(),
        queue_count: instance.queue_count(),
        buffer_capacity: instance.buffer_capacity(),
        instance_fingerprint: instance.fingerprint(),
        steps,
    })
}

// ── Schedule ────────────────────────────────────────────────────────────────

pub fn encode_schedule(schedule: &OptSchedule) -> String {
    let mut out = format!(
        "{{\"throughput\":{},\"certified\":{},\"transmit\":[",
        schedule.throughput, schedule.certified
    );
    for (i, r) in schedule.transmit.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"packet\":{},\"queue\":{},\"arrival_step\":{},\"step\":{}}}",
            r.packet, r.queue, r.arrival_step, r.step
        ));
    }
    out.push_str("]}");
    out
}

pub fn decode_schedule(text: &str, instance: &Instance) -> Result<OptSchedule, CodecError> {
    let v: Value = serde_json::from_str(text)?;
    let throughput = get_field(&v, "throughput", "")?
        .as_u64()
        .map_or_else(|| schema_err("/throughput", "expected a non-negative integer"), Ok)?;
    let certified = get_field(&v, "certified", "")?
        .as_bool()
        .map_or_else(|| schema_err("/certified", "expected a boolean"), Ok)?;
    let list = get_field(&v, "transmit", "")?
        .as_array()
        .map_or_else(|| schema_err("/transmit", "expected an array"), Ok)?;
    let mut transmit = Vec::with_capacity(list.len());
    for (i, r) in list.iter().enumerate() {
        let ptr = format!("/transmit/{i}");
        transmit.push(TransmitRecord {
            packet: get_u32(get_field(r, "packet", &ptr)?, &format!("{ptr}/packet"))?,
            queue: get_u32(get_field(r, "queue", &ptr)?, &format!("{ptr}/queue"))?,
            arrival_step: get_u32(
                get_field(r, "arrival_step", &ptr)?,
                &format!("{ptr}/arrival_step"),
            )?,
            step: get_u32(get_field(r, "step", &ptr)?, &format!("{ptr}/step"))?,
        });
    }
    if throughput != transmit.len() as u64 {
        return schema_err("/throughput", "does not match transmit list length");
    }
    Ok(OptSchedule {
        throughput,
        certified,
        transmit,
        instance_fingerprint: instance.fingerprint(),
    })
}

// ── Reports and ledger export ───────────────────────────────────────────────

pub fn encode_report(report: &VerificationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Versioned nested export of every named analysis quantity. Rationals are
/// rendered as `"num/den"` strings to stay exact.
pub fn encode_ledger(ledger: &AnalysisLedger) -> String {
    use serde_json::json;
    let rat = |r: &crate::Rat| format!("{}/{}", r.numer(), r.denom());
    let phases: Vec<Value> = (0..ledger.phases.phase_count())
        .map(|i| {
            let totals = &ledger.phase_totals[i];
            let queues: Vec<Value> = ledger
                .views
                .iter()
                .filter(|((pi, _), _)| *pi == i)
                .map(|((_, q), view)| {
                    let profit = ledger.profit.get(&(i, *q));
                    json!({
                        "queue": q,
                        "live": view.live,
                        "dying": view.dying,
                        "sigma": rat(&view.sigma),
                        "sigma_next": rat(&view.sigma_next),
                        "e_iq": view.e_iq,
                        "ehat_iq": view.ehat_iq,
                        "o_q": view.o_q,
                        "g_q": view.g_q,
                        "h_q": view.h_q,
                        "d_q": view.d_q,
                        "z_q": view.z_q,
                        "l_increase": profit.map(|p| rat(&p.l_increase)),
                        "s_increase": profit.map(|p| rat(&p.s_increase)),
                    })
                })
                .collect();
            json!({
                "phase": i,
                "tau": ledger.phases.taus[i],
                "end": ledger.phases.phase_end(i),
                "q_set": ledger.phases.q_sets[i],
                "active_future": ledger.phases.a_sets[i],
                "u": totals.u,
                "v": totals.v,
                "lqd": totals.lqd,
                "n": totals.n,
                "o": totals.o,
                "delta_psi": rat(&totals.delta_psi),
                "ehat_total": totals.ehat_total,
                "queues": queues,
            })
        })
        .collect();
    let doc = json!({
        "schema_version": 1,
        "alpha": rat(&ledger.alpha),
        "beta": rat(&ledger.beta),
        "horizon": ledger.horizon,
        "lqd": ledger.lqd_total,
        "opt": ledger.opt_total,
        "certified": ledger.certified,
        "opt_extra_total": ledger.extras.opt_extra_total,
        "lqd_extra_total": ledger.extras.lqd_extra_total,
        "e_q": ledger.extras.e_q,
        "m_q": ledger.mapping.m_q,
        "ehat_q": ledger.ehat_q,
        "t_q": ledger.phases.t_q,
        "taus": ledger.phases.taus,
        "pre_phase_profit": ledger.pre_phase_profit,
        "phi_q": ledger.phi_q.iter().map(rat).collect::<Vec<_>>(),
        "unassigned_extras": ledger.mapping.unassigned,
        "phases": phases,
    });
    serde_json::to_string_pretty(&doc).expect("ledger serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::{solve_exact, SearchLimits};
    use crate::switch::{simulate_lqd, TieBreak};

    fn sample_instance() -> Instance {
        build_instance(
            4,
            &[
                ArrivalEvent { step: 0, queue: 0, count: 4 },
                ArrivalEvent { step: 0, queue: 1, count: 1 },
                ArrivalEvent { step: 2, queue: 1, count: 2 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn instance_roundtrip_is_identity() {
        let inst = sample_instance();
        let text = encode_instance(&inst);
        let back = decode_instance(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(encode_instance(&back), text);
    }

    #[test]
    fn decode_reports_pointer_on_bad_count() {
        let text = r#"{"buffer_capacity":3,"arrivals":[{"step":0,"queue":1,"count":2},{"step":1,"queue":0,"count":-4}]}"#;
        let err = decode_instance(text).unwrap_err();
        match err {
            CodecError::Schema { pointer, .. } => assert_eq!(pointer, "/arrivals/1/count"),
            other => panic!("unexpected error {other}"),
        }
        let text = r#"{"buffer_capacity":0,"arrivals":[]}"#;
        assert!(matches!(decode_instance(text), Err(CodecError::Validation(_))));
    }

    #[test]
    fn trace_roundtrip_and_stability() {
        let inst = sample_instance();
        let trace = simulate_lqd(&inst, &TieBreak::MinQueueId);
        let a = encode_trace_jsonl(&trace);
        let b = encode_trace_jsonl(&simulate_lqd(&inst, &TieBreak::MinQueueId));
        assert_eq!(a, b, "encoder must be byte-stable");
        let back = decode_trace_jsonl(&a, "lqd", &inst).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn schedule_roundtrip() {
        let inst = sample_instance();
        let sched = solve_exact(&inst, &SearchLimits::default());
        let text = encode_schedule(&sched);
        let back = decode_schedule(&text, &inst).unwrap();
        assert_eq!(back, sched);
    }
}
