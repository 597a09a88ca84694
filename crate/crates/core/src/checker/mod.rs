//! Post-hoc verdicts over traces: detector class properties, consensus
//! properties and progress lemmas.
//!
//! Perpetual properties are checked over every recorded value. Eventual
//! properties are checked over the final window and come out
//! INCONCLUSIVE when the run leaves too little time to settle.
//! Label participation sets are built from the finite trace, so a safety
//! PASS only speaks for the observed horizon.

mod classes;
mod consensus;
mod lemmas;
mod realizations;

use std::fmt;

use crate::kernel::Trace;
use crate::model::{FailurePattern, ProcessKey, SystemSpec, Time};
use crate::output::FdClass;
use crate::scenario::Resolved;
use crate::stack::Component;

pub use classes::check_class;
pub use consensus::{check_consensus, decision_rounds};
pub use lemmas::{check_consensus_lemmas, check_dhp_lemmas};
pub use realizations::{disjoint_picks, disjoint_realizations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    /// `<stream>:<property>`.
    pub property: String,
    pub status: Status,
    pub witness: String,
}

impl Verdict {
    pub fn pass(property: impl Into<String>) -> Self {
        Self::new(property, Status::Pass, "-")
    }

    pub fn fail(property: impl Into<String>, witness: impl Into<String>) -> Self {
        Self::new(property, Status::Fail, witness)
    }

    pub fn inconclusive(property: impl Into<String>, witness: impl Into<String>) -> Self {
        Self::new(property, Status::Inconclusive, witness)
    }

    pub(crate) fn new(
        property: impl Into<String>,
        status: Status,
        witness: impl Into<String>,
    ) -> Self {
        Self {
            property: property.into(),
            status,
            witness: witness.into(),
        }
    }

    /// Property name without the stream prefix.
    pub fn short_name(&self) -> &str {
        self.property
            .rsplit_once(':')
            .map_or(self.property.as_str(), |(_, p)| p)
    }

    /// Whether a `--check` selector names this verdict: the full name, the
    /// stream, or the bare property.
    pub fn selected_by(&self, selector: &str) -> bool {
        selector == "all"
            || selector == self.property
            || selector == self.short_name()
            || self
                .property
                .strip_prefix(selector)
                .is_some_and(|r| r.starts_with(':'))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.property, self.status, self.witness)
    }
}

/// What the checker needs to know about the run besides the trace.
#[derive(Debug, Clone)]
pub struct CheckContext {
    pub spec: SystemSpec,
    pub pattern: FailurePattern,
    pub horizon: Time,
    pub window_start: Time,
    pub stable_from: Time,
    pub settle_len: Time,
    /// Whether eventual properties may be decided over the window.
    pub conclusive: bool,
}

impl CheckContext {
    pub fn from_resolved(r: &Resolved) -> Self {
        Self {
            spec: r.scenario.spec.clone(),
            pattern: r.pattern.clone(),
            horizon: r.scenario.horizon,
            window_start: r.window_start(),
            stable_from: r.stable_from(),
            settle_len: r.settle_len(),
            conclusive: r.window_conclusive(),
        }
    }

    pub fn correct(&self) -> std::collections::BTreeSet<ProcessKey> {
        self.pattern.correct(&self.spec)
    }

    /// Verdict for an eventual property given its outcome over the window.
    pub(crate) fn eventual(&self, property: String, outcome: Result<(), String>) -> Verdict {
        match (self.conclusive, outcome) {
            (true, Ok(())) => Verdict::pass(property),
            (true, Err(w)) => Verdict::fail(property, w),
            (false, Ok(())) => {
                Verdict::inconclusive(property, "holds over the window, settle margin too short")
            }
            (false, Err(w)) => {
                Verdict::inconclusive(property, format!("settle margin too short; {w}"))
            }
        }
    }
}

/// Every verdict that applies to a run of `resolved`.
pub fn check_all(trace: &Trace, resolved: &Resolved) -> Vec<Verdict> {
    let ctx = CheckContext::from_resolved(resolved);
    let mut out = Vec::new();
    for (stream, class) in resolved.plan.streams() {
        out.extend(check_class(trace, class, &stream, &ctx));
    }
    let components: Vec<Component> = resolved.scenario.components().collect();
    if components.contains(&Component::Dhp) {
        out.extend(check_dhp_lemmas(trace, &ctx));
    }
    if resolved.scenario.consensus.is_some() {
        out.extend(check_consensus(trace, &resolved.scenario.proposals, &ctx));
        out.extend(check_consensus_lemmas(trace, &ctx));
    }
    out.push(match trace.violations().first() {
        None => Verdict::pass("trace:layer_violations"),
        Some(e) => Verdict::fail(
            "trace:layer_violations",
            format!(
                "{}@{}#{}: {}",
                e.proc,
                e.time,
                e.seq,
                violation_text(&e.kind)
            ),
        ),
    });
    out
}

fn violation_text(kind: &crate::kernel::EventKind) -> &str {
    match kind {
        crate::kernel::EventKind::Violation(d) => d,
        _ => "",
    }
}

/// The class a stream name carries, for trace-only checking.
pub fn stream_class(stream: &str) -> Option<FdClass> {
    if let Some(c) = stream.strip_prefix("oracle.") {
        return c.parse().ok();
    }
    stream
        .parse::<Component>()
        .ok()
        .map(Component::output_class)
}

/// Line-oriented report, one verdict per line.
pub fn report(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn any_fail(verdicts: &[Verdict]) -> bool {
    verdicts.iter().any(|v| v.status == Status::Fail)
}

pub(crate) fn at(key: ProcessKey, time: Time, seq: u64) -> String {
    format!("{key}@{time}#{seq}")
}
