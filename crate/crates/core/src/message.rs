//! Wire payloads exchanged by the automata, with their trace text form.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::model::Identity;
use crate::output::{list_items, Label, ParseValueError};

/// Proposal value, or `None` for the "no estimate" mark.
pub type Est = Option<u64>;

pub const BOT_EST: &str = "_BOT_EST_";

pub fn render_est(e: &Est) -> String {
    match e {
        Some(v) => v.to_string(),
        None => BOT_EST.to_string(),
    }
}

pub fn parse_est(s: &str) -> Result<Est, ParseValueError> {
    if s == BOT_EST {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| ParseValueError {
        text: s.to_string(),
        reason: "bad estimate",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    One,
    Two,
}

/// Extra fields carried by phase messages of the quorum-based consensus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuorumTag {
    pub id: Identity,
    pub sr: u64,
    pub labels: BTreeSet<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Polling {
        r: u64,
        id: Identity,
    },
    PReply {
        lo: u64,
        hi: u64,
        dest: Identity,
        sender: Identity,
    },
    Ident(Identity),
    Alive(Identity),
    Labels {
        id: Identity,
        labels: BTreeSet<Label>,
    },
    Coord {
        id: Identity,
        r: u64,
        est: u64,
    },
    Ph0 {
        r: u64,
        est: u64,
    },
    Phase {
        phase: Phase,
        r: u64,
        tag: Option<QuorumTag>,
        est: Est,
    },
    Decide(u64),
    /// Free-form payload for ad-hoc test automata.
    Note(String),
}

fn write_labels(f: &mut fmt::Formatter<'_>, labels: &BTreeSet<Label>) -> fmt::Result {
    f.write_str("{")?;
    for (i, l) in labels.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{l}")?;
    }
    f.write_str("}")
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Polling { r, id } => write!(f, "POLLING {r} {id}"),
            Message::PReply {
                lo,
                hi,
                dest,
                sender,
            } => write!(f, "P_REPLY {lo} {hi} {dest} {sender}"),
            Message::Ident(id) => write!(f, "IDENT {id}"),
            Message::Alive(id) => write!(f, "ALIVE {id}"),
            Message::Labels { id, labels } => {
                write!(f, "LABELS {id} ")?;
                write_labels(f, labels)
            }
            Message::Coord { id, r, est } => write!(f, "COORD {id} {r} {est}"),
            Message::Ph0 { r, est } => write!(f, "PH0 {r} {est}"),
            Message::Phase { phase, r, tag, est } => {
                let name = match phase {
                    Phase::One => "PH1",
                    Phase::Two => "PH2",
                };
                match tag {
                    None => write!(f, "{name} {r} {}", render_est(est)),
                    Some(t) => {
                        write!(f, "{name} {} {r} {} ", t.id, t.sr)?;
                        write_labels(f, &t.labels)?;
                        write!(f, " {}", render_est(est))
                    }
                }
            }
            Message::Decide(v) => write!(f, "DECIDE {v}"),
            Message::Note(s) => write!(f, "NOTE {s}"),
        }
    }
}

fn bad(s: &str) -> ParseValueError {
    ParseValueError {
        text: s.to_string(),
        reason: "malformed message",
    }
}

fn num(s: &str, whole: &str) -> Result<u64, ParseValueError> {
    s.parse().map_err(|_| bad(whole))
}

fn ident(s: &str, whole: &str) -> Result<Identity, ParseValueError> {
    s.parse().map_err(|_| bad(whole))
}

fn labels(s: &str) -> Result<BTreeSet<Label>, ParseValueError> {
    list_items(s, '{', '}')?
        .into_iter()
        .map(str::parse)
        .collect()
}

impl FromStr for Message {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, rest) = s.split_once(' ').unwrap_or((s, ""));
        if head == "NOTE" {
            return Ok(Message::Note(rest.to_string()));
        }
        // Label sets contain no spaces, so plain splitting is safe.
        let f: Vec<&str> = rest.split(' ').filter(|x| !x.is_empty()).collect();
        let msg = match (head, f.as_slice()) {
            ("POLLING", [r, id]) => Message::Polling {
                r: num(r, s)?,
                id: ident(id, s)?,
            },
            ("P_REPLY", [lo, hi, d, q]) => Message::PReply {
                lo: num(lo, s)?,
                hi: num(hi, s)?,
                dest: ident(d, s)?,
                sender: ident(q, s)?,
            },
            ("IDENT", [id]) => Message::Ident(ident(id, s)?),
            ("ALIVE", [id]) => Message::Alive(ident(id, s)?),
            ("LABELS", [id, ls]) => Message::Labels {
                id: ident(id, s)?,
                labels: labels(ls)?,
            },
            ("COORD", [id, r, est]) => Message::Coord {
                id: ident(id, s)?,
                r: num(r, s)?,
                est: num(est, s)?,
            },
            ("PH0", [r, est]) => Message::Ph0 {
                r: num(r, s)?,
                est: num(est, s)?,
            },
            ("PH1" | "PH2", fields) => {
                let phase = if head == "PH1" {
                    Phase::One
                } else {
                    Phase::Two
                };
                match fields {
                    [r, est] => Message::Phase {
                        phase,
                        r: num(r, s)?,
                        tag: None,
                        est: parse_est(est)?,
                    },
                    [id, r, sr, ls, est] => Message::Phase {
                        phase,
                        r: num(r, s)?,
                        tag: Some(QuorumTag {
                            id: ident(id, s)?,
                            sr: num(sr, s)?,
                            labels: labels(ls)?,
                        }),
                        est: parse_est(est)?,
                    },
                    _ => return Err(bad(s)),
                }
            }
            ("DECIDE", [v]) => Message::Decide(num(v, s)?),
            _ => return Err(bad(s)),
        };
        Ok(msg)
    }
}
