//! Event log produced by a run, and its line-oriented text form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::message::Message;
use crate::model::{ProcessKey, Time};
use crate::output::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    At(Time),
    Lost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepKind {
    Start,
    Tick,
    Timer { layer: String, tag: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Send {
        env: u64,
        partial: bool,
        out: Vec<Outcome>,
        payload: Message,
    },
    Deliver {
        env: u64,
        from: ProcessKey,
    },
    Crash,
    Step(StepKind),
    OutputChange {
        stream: String,
        value: Value,
    },
    Decide(u64),
    Violation(String),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Send { .. } => "send",
            EventKind::Deliver { .. } => "deliver",
            EventKind::Crash => "crash",
            EventKind::Step(_) => "step",
            EventKind::OutputChange { .. } => "output_change",
            EventKind::Decide(_) => "decide",
            EventKind::Violation(_) => "violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub time: Time,
    pub seq: u64,
    pub proc: ProcessKey,
    pub kind: EventKind,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t",
            self.time,
            self.seq,
            self.kind.name(),
            self.proc
        )?;
        match &self.kind {
            EventKind::Send {
                env,
                partial,
                out,
                payload,
            } => {
                write!(f, "env={env} ")?;
                if *partial {
                    f.write_str("partial ")?;
                }
                f.write_str("out=")?;
                for (i, o) in out.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    match o {
                        Outcome::At(t) => write!(f, "p{i}@{t}")?,
                        Outcome::Lost => write!(f, "p{i}@lost")?,
                    }
                }
                write!(f, " {payload}")
            }
            EventKind::Deliver { env, from } => write!(f, "env={env} from={from}"),
            EventKind::Crash => f.write_str("-"),
            EventKind::Step(StepKind::Start) => f.write_str("start"),
            EventKind::Step(StepKind::Tick) => f.write_str("tick"),
            EventKind::Step(StepKind::Timer { layer, tag }) => write!(f, "timer {layer} {tag}"),
            EventKind::OutputChange { stream, value } => write!(f, "{stream}={value}"),
            EventKind::Decide(v) => write!(f, "{v}"),
            EventKind::Violation(d) => f.write_str(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

fn parse_event(text: &str) -> Result<TraceEvent, String> {
    let cols: Vec<&str> = text.splitn(5, '\t').collect();
    let [time, seq, kind, proc, detail] = cols.as_slice() else {
        return Err("expected five tab-separated columns".into());
    };
    let time: Time = time.parse().map_err(|_| format!("bad time `{time}`"))?;
    let seq: u64 = seq.parse().map_err(|_| format!("bad seq `{seq}`"))?;
    let proc: ProcessKey = proc.parse().map_err(|_| format!("bad process `{proc}`"))?;
    let kind = match *kind {
        "send" => {
            let rest = detail.strip_prefix("env=").ok_or("send without env")?;
            let (env, rest) = rest.split_once(' ').ok_or("truncated send")?;
            let env: u64 = env.parse().map_err(|_| "bad env")?;
            let (partial, rest) = match rest.strip_prefix("partial ") {
                Some(r) => (true, r),
                None => (false, rest),
            };
            let rest = rest.strip_prefix("out=").ok_or("send without out")?;
            let (outs, payload) = rest.split_once(' ').ok_or("send without payload")?;
            let mut out = Vec::new();
            for (i, o) in outs.split(',').enumerate() {
                let (dest, at) = o.split_once('@').ok_or("bad outcome")?;
                if dest != format!("p{i}") {
                    return Err(format!("outcome `{o}` out of order"));
                }
                out.push(if at == "lost" {
                    Outcome::Lost
                } else {
                    Outcome::At(at.parse().map_err(|_| "bad delivery time")?)
                });
            }
            let payload: Message = payload.parse().map_err(|e| format!("{e}"))?;
            EventKind::Send {
                env,
                partial,
                out,
                payload,
            }
        }
        "deliver" => {
            let (env, from) = detail.split_once(' ').ok_or("truncated deliver")?;
            let env = env
                .strip_prefix("env=")
                .and_then(|e| e.parse().ok())
                .ok_or("bad env")?;
            let from = from
                .strip_prefix("from=")
                .and_then(|f| f.parse().ok())
                .ok_or("bad sender")?;
            EventKind::Deliver { env, from }
        }
        "crash" => EventKind::Crash,
        "step" => match *detail {
            "start" => EventKind::Step(StepKind::Start),
            "tick" => EventKind::Step(StepKind::Tick),
            d => {
                let parts: Vec<&str> = d.split(' ').collect();
                match parts.as_slice() {
                    ["timer", layer, tag] => EventKind::Step(StepKind::Timer {
                        layer: layer.to_string(),
                        tag: tag.parse().map_err(|_| "bad timer tag")?,
                    }),
                    _ => return Err(format!("bad step `{d}`")),
                }
            }
        },
        "output_change" => {
            let (stream, value) = detail.split_once('=').ok_or("output without stream")?;
            EventKind::OutputChange {
                stream: stream.to_string(),
                value: value.parse().map_err(|e| format!("{e}"))?,
            }
        }
        "decide" => EventKind::Decide(detail.parse().map_err(|_| "bad decision")?),
        "violation" => EventKind::Violation(detail.to_string()),
        k => return Err(format!("unknown event kind `{k}`")),
    };
    Ok(TraceEvent {
        time,
        seq,
        proc,
        kind,
    })
}

/// Value history of one stream at one process: `(time, seq, value)`.
pub type History = Vec<(Time, u64, Value)>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: Time, proc: ProcessKey, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            time,
            seq,
            proc,
            kind,
        });
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = parse_event(line).map_err(|reason| TraceParseError {
                line: i + 1,
                reason,
            })?;
            events.push(e);
        }
        Ok(Trace { events })
    }

    /// Per-process value history of `stream`.
    pub fn history(&self, stream: &str) -> BTreeMap<ProcessKey, History> {
        let mut out: BTreeMap<ProcessKey, History> = BTreeMap::new();
        for e in &self.events {
            if let EventKind::OutputChange { stream: s, value } = &e.kind {
                if s == stream {
                    out.entry(e.proc)
                        .or_default()
                        .push((e.time, e.seq, value.clone()));
                }
            }
        }
        out
    }

    pub fn streams(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::OutputChange { stream, .. } => Some(stream.clone()),
                _ => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn decisions(&self) -> Vec<&TraceEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Decide(_)))
            .collect()
    }

    pub fn sends(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Send { .. }))
    }

    /// Payload of every envelope, by envelope number.
    pub fn payloads(&self) -> BTreeMap<u64, (ProcessKey, &Message)> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Send { env, payload, .. } => Some((*env, (e.proc, payload))),
                _ => None,
            })
            .collect()
    }

    /// Deliveries with their payloads: `(event, sender, payload)`.
    pub fn deliveries(&self) -> Vec<(&TraceEvent, ProcessKey, &Message)> {
        let payloads = self.payloads();
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Deliver { env, from } => payloads.get(env).map(|(_, m)| (e, *from, *m)),
                _ => None,
            })
            .collect()
    }

    pub fn violations(&self) -> Vec<&TraceEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Violation(_)))
            .collect()
    }
}

impl FromStr for Trace {
    type Err = TraceParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trace::parse(s)
    }
}
