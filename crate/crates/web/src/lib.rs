//! Browser bindings: run a scenario, check an edited trace, sweep seeds.
//!
//! Every export takes scenario text and returns a JSON string. Failures come
//! back as `{"error": "..."}` rather than exceptions.

use std::collections::BTreeMap;

use homonym::checker::{check_all, decision_rounds, Status, Verdict};
use homonym::kernel::trace::EventKind;
use homonym::kernel::Trace;
use homonym::scenario::{run_scenario, Scenario};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest seed range a single sweep call accepts.
pub const MAX_SWEEP: u64 = 2000;

fn respond(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn verdicts_json(verdicts: &[Verdict]) -> Value {
    verdicts
        .iter()
        .map(|v| json!({ "property": v.property, "status": v.status.name(), "witness": v.witness }))
        .collect()
}

fn parse(text: &str) -> Result<Scenario, String> {
    Scenario::parse(text).map_err(|e| e.to_string())
}

fn outputs_json(trace: &Trace) -> Value {
    let mut changes = Vec::new();
    let mut last: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for e in &trace.events {
        if let EventKind::OutputChange { stream, value } = &e.kind {
            let value = value.to_string();
            changes.push(json!({ "time": e.time, "proc": e.proc.to_string(), "stream": stream, "value": value }));
            last.entry(stream.clone())
                .or_default()
                .insert(e.proc.to_string(), value);
        }
    }
    json!({ "changes": changes, "last": last })
}

fn simulate_json(text: &str) -> Result<Value, String> {
    let scenario = parse(text)?;
    let (resolved, trace) = run_scenario(&scenario).map_err(|e| e.to_string())?;
    let verdicts = check_all(&trace, &resolved);
    let rounds = decision_rounds(&trace);
    let decisions: Vec<Value> = trace
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Decide(v) => Some(json!({
                "proc": e.proc.to_string(),
                "time": e.time,
                "value": v,
                "round": rounds.get(&e.proc),
            })),
            _ => None,
        })
        .collect();
    let crashes: Vec<Value> = resolved
        .pattern
        .crashes()
        .map(|(p, t)| json!({ "proc": p.to_string(), "time": t }))
        .collect();
    let ids: Vec<String> = scenario.spec.ids().iter().map(|i| i.to_string()).collect();
    Ok(json!({
        "seed": scenario.seed,
        "horizon": scenario.horizon,
        "window": scenario.window,
        "ids": ids,
        "crashes": crashes,
        "events": trace.events.len(),
        "sends": trace.sends().count(),
        "verdicts": verdicts_json(&verdicts),
        "decisions": decisions,
        "outputs": outputs_json(&trace),
        "trace": trace.to_text(),
    }))
}

fn check_json(scenario: &str, trace: &str) -> Result<Value, String> {
    let resolved = parse(scenario)?.resolve().map_err(|e| e.to_string())?;
    let trace = Trace::parse(trace).map_err(|e| e.to_string())?;
    Ok(json!({ "verdicts": verdicts_json(&check_all(&trace, &resolved)) }))
}

fn sweep_json(text: &str, first: u64, last: u64) -> Result<Value, String> {
    if last < first {
        return Err(format!("empty seed range {first}..{last}"));
    }
    if last - first >= MAX_SWEEP {
        return Err(format!("at most {MAX_SWEEP} seeds per sweep"));
    }
    let template = parse(text)?;
    let mut order: Vec<String> = Vec::new();
    let mut counts: BTreeMap<String, [u64; 3]> = BTreeMap::new();
    let mut first_fail: BTreeMap<String, Value> = BTreeMap::new();
    let mut rounds: BTreeMap<String, u64> = BTreeMap::new();
    for seed in first..=last {
        let s = template.with_seed(seed);
        let (resolved, trace) = run_scenario(&s).map_err(|e| format!("seed {seed}: {e}"))?;
        for v in check_all(&trace, &resolved) {
            let c = counts.entry(v.property.clone()).or_insert_with(|| {
                order.push(v.property.clone());
                [0; 3]
            });
            c[match v.status {
                Status::Pass => 0,
                Status::Fail => 1,
                Status::Inconclusive => 2,
            }] += 1;
            if v.status == Status::Fail {
                first_fail
                    .entry(v.property.clone())
                    .or_insert_with(|| json!({ "seed": seed, "witness": v.witness }));
            }
        }
        if s.consensus.is_some() {
            let key = decision_rounds(&trace)
                .values()
                .max()
                .map_or("none".to_string(), u64::to_string);
            *rounds.entry(key).or_default() += 1;
        }
    }
    let rows: Vec<Value> = order
        .iter()
        .map(|p| {
            let [pass, fail, inconclusive] = counts[p];
            json!({
                "property": p,
                "pass": pass,
                "fail": fail,
                "inconclusive": inconclusive,
                "first_fail": first_fail.get(p),
            })
        })
        .collect();
    Ok(json!({ "runs": last - first + 1, "rows": rows, "rounds": rounds }))
}

/// Runs one scenario and returns its summary, verdicts, outputs and trace.
#[wasm_bindgen]
pub fn simulate(scenario: &str) -> String {
    respond(simulate_json(scenario))
}

/// Checks a (possibly hand-edited) trace against the scenario that produced it.
#[wasm_bindgen]
pub fn check(scenario: &str, trace: &str) -> String {
    respond(check_json(scenario, trace))
}

/// Runs seeds `first..=last` and tallies verdicts per property.
#[wasm_bindgen]
pub fn sweep(scenario: &str, first: u64, last: u64) -> String {
    respond(sweep_json(scenario, first, last))
}
