use std::collections::BTreeMap;

use super::{at, CheckContext, Verdict};
use crate::kernel::{EventKind, Trace, TraceEvent};
use crate::model::ProcessKey;

fn decided(e: &TraceEvent) -> u64 {
    match e.kind {
        EventKind::Decide(v) => v,
        _ => unreachable!(),
    }
}

/// Validity, agreement, integrity and termination of the decisions in `trace`.
pub fn check_consensus(trace: &Trace, proposals: &[u64], ctx: &CheckContext) -> Vec<Verdict> {
    let decisions = trace.decisions();
    let validity = match decisions.iter().find(|e| !proposals.contains(&decided(e))) {
        None => Verdict::pass("consensus:validity"),
        Some(e) => Verdict::fail(
            "consensus:validity",
            format!(
                "{} decided {}, not a proposal",
                at(e.proc, e.time, e.seq),
                decided(e)
            ),
        ),
    };
    let agreement = match decisions
        .iter()
        .find(|e| decided(e) != decided(decisions[0]))
    {
        None => Verdict::pass("consensus:agreement"),
        Some(e) => {
            let d = decisions[0];
            Verdict::fail(
                "consensus:agreement",
                format!(
                    "{} decided {} but {} decided {}",
                    at(d.proc, d.time, d.seq),
                    decided(d),
                    at(e.proc, e.time, e.seq),
                    decided(e)
                ),
            )
        }
    };
    let mut first: BTreeMap<ProcessKey, &TraceEvent> = BTreeMap::new();
    let mut twice = None;
    for e in &decisions {
        if let Some(prev) = first.insert(e.proc, e) {
            twice.get_or_insert((prev, *e));
        }
    }
    let integrity = match twice {
        None => Verdict::pass("consensus:integrity"),
        Some((a, b)) => Verdict::fail(
            "consensus:integrity",
            format!(
                "{} decided again at {}",
                at(a.proc, a.time, a.seq),
                at(b.proc, b.time, b.seq)
            ),
        ),
    };
    let undecided: Vec<String> = ctx
        .correct()
        .into_iter()
        .filter(|p| !first.contains_key(p))
        .map(|p| p.to_string())
        .collect();
    let termination = if undecided.is_empty() {
        Verdict::pass("consensus:termination")
    } else {
        let w = format!("undecided by {}: {}", ctx.horizon, undecided.join(","));
        if ctx.conclusive {
            Verdict::fail("consensus:termination", w)
        } else {
            Verdict::inconclusive(
                "consensus:termination",
                format!("settle margin too short; {w}"),
            )
        }
    };
    vec![validity, agreement, integrity, termination]
}

/// Round in which each deciding process decided, from its progress stream.
pub fn decision_rounds(trace: &Trace) -> BTreeMap<ProcessKey, u64> {
    let mut round: BTreeMap<ProcessKey, u64> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for e in &trace.events {
        match &e.kind {
            EventKind::OutputChange { stream, value } if stream == "consensus" => {
                if let Some(p) = value.as_progress() {
                    round.insert(e.proc, p.round);
                }
            }
            EventKind::Decide(_) => {
                out.entry(e.proc)
                    .or_insert_with(|| round.get(&e.proc).copied().unwrap_or(0));
            }
            _ => {}
        }
    }
    out
}
