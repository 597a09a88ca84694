//! Failure-detector classes, their output values, and the canonical text form
//! used in traces.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{IdMultiset, Identity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{text}`: {reason}")]
pub struct ParseValueError {
    pub text: String,
    pub reason: &'static str,
}

fn perr(text: &str, reason: &'static str) -> ParseValueError {
    ParseValueError {
        text: text.to_string(),
        reason,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FdClass {
    Sigma,
    Omega,
    AOmega,
    ApBar,
    ASigma,
    HOmega,
    HSigma,
    /// ◇HP̄
    Dhp,
    Xi,
}

impl FdClass {
    pub const ALL: [FdClass; 9] = [
        FdClass::Sigma,
        FdClass::Omega,
        FdClass::AOmega,
        FdClass::ApBar,
        FdClass::ASigma,
        FdClass::HOmega,
        FdClass::HSigma,
        FdClass::Dhp,
        FdClass::Xi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FdClass::Sigma => "sigma",
            FdClass::Omega => "omega",
            FdClass::AOmega => "aomega",
            FdClass::ApBar => "apbar",
            FdClass::ASigma => "asigma",
            FdClass::HOmega => "homega",
            FdClass::HSigma => "hsigma",
            FdClass::Dhp => "dhp",
            FdClass::Xi => "xi",
        }
    }
}

impl fmt::Display for FdClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FdClass {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FdClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| perr(s, "unknown failure detector class"))
    }
}

/// Quorum label. Oracles use opaque tags; the algorithms use identifier
/// multisets (or sets, as multisets of multiplicity one) as labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Tag(u32),
    Set(IdMultiset),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tag(t) => write!(f, "x{t}"),
            Label::Set(m) => write!(f, "[{m}]"),
        }
    }
}

impl FromStr for Label {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let m = inner.parse().map_err(|_| perr(s, "bad label multiset"))?;
            return Ok(Label::Set(m));
        }
        s.strip_prefix('x')
            .and_then(|t| t.parse().ok())
            .map(Label::Tag)
            .ok_or_else(|| perr(s, "bad label"))
    }
}

/// Value of a failure-detector output variable at one process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FdOutput {
    Sigma {
        trusted: BTreeSet<Identity>,
    },
    Omega {
        leader: Identity,
    },
    AOmega {
        a_leader: bool,
    },
    ApBar {
        anap: usize,
    },
    /// Kept as a set of pairs so that a duplicated label stays observable.
    ASigma {
        a_sigma: BTreeSet<(Label, usize)>,
    },
    HOmega {
        leader: Identity,
        multiplicity: usize,
    },
    HSigma {
        quora: BTreeSet<(Label, IdMultiset)>,
        labels: BTreeSet<Label>,
    },
    Dhp {
        trusted: IdMultiset,
    },
    Xi {
        alive: Vec<Identity>,
    },
}

impl FdOutput {
    pub fn class(&self) -> FdClass {
        match self {
            FdOutput::Sigma { .. } => FdClass::Sigma,
            FdOutput::Omega { .. } => FdClass::Omega,
            FdOutput::AOmega { .. } => FdClass::AOmega,
            FdOutput::ApBar { .. } => FdClass::ApBar,
            FdOutput::ASigma { .. } => FdClass::ASigma,
            FdOutput::HOmega { .. } => FdClass::HOmega,
            FdOutput::HSigma { .. } => FdClass::HSigma,
            FdOutput::Dhp { .. } => FdClass::Dhp,
            FdOutput::Xi { .. } => FdClass::Xi,
        }
    }
}

fn write_list<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    open: &str,
    close: &str,
    items: impl IntoIterator<Item = T>,
) -> fmt::Result {
    f.write_str(open)?;
    for (i, it) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{it}")?;
    }
    f.write_str(close)
}

impl fmt::Display for FdOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FdOutput::Sigma { trusted } => {
                f.write_str("trusted=")?;
                write_list(f, "{", "}", trusted)
            }
            FdOutput::Omega { leader } => write!(f, "leader={leader}"),
            FdOutput::AOmega { a_leader } => write!(f, "a_leader={a_leader}"),
            FdOutput::ApBar { anap } => write!(f, "anap={anap}"),
            FdOutput::ASigma { a_sigma } => {
                f.write_str("a_sigma=")?;
                write_list(
                    f,
                    "{",
                    "}",
                    a_sigma.iter().map(|(x, y)| format!("({x},{y})")),
                )
            }
            FdOutput::HOmega {
                leader,
                multiplicity,
            } => write!(f, "h_leader={leader} h_multiplicity={multiplicity}"),
            FdOutput::HSigma { quora, labels } => {
                f.write_str("h_quora=")?;
                write_list(f, "{", "}", quora.iter().map(|(x, m)| format!("({x},{m})")))?;
                f.write_str(" h_labels=")?;
                write_list(f, "{", "}", labels)
            }
            FdOutput::Dhp { trusted } => write!(f, "h_trusted={trusted}"),
            FdOutput::Xi { alive } => {
                f.write_str("alive=")?;
                write_list(f, "[", "]", alive)
            }
        }
    }
}

/// Splits on `sep` at bracket depth zero.
pub(crate) fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Items of `{a,b,c}` or `[a,b,c]`.
pub(crate) fn list_items(s: &str, open: char, close: char) -> Result<Vec<&str>, ParseValueError> {
    let inner = s
        .strip_prefix(open)
        .and_then(|r| r.strip_suffix(close))
        .ok_or_else(|| perr(s, "expected bracketed list"))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    Ok(split_top(inner, ','))
}

fn pair_parts(s: &str) -> Result<(&str, &str), ParseValueError> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| perr(s, "expected pair"))?;
    let parts = split_top(inner, ',');
    match parts.as_slice() {
        [a, b] => Ok((a, b)),
        _ => Err(perr(s, "expected pair")),
    }
}

fn field<'a>(s: &'a str, name: &str) -> Result<&'a str, ParseValueError> {
    s.strip_prefix(name)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| perr(s, "missing field"))
}

fn ident(s: &str) -> Result<Identity, ParseValueError> {
    s.parse().map_err(|_| perr(s, "bad identity"))
}

impl FromStr for FdOutput {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let head = s.split('=').next().unwrap_or("");
        let out = match head {
            "trusted" => FdOutput::Sigma {
                trusted: list_items(field(s, "trusted")?, '{', '}')?
                    .into_iter()
                    .map(ident)
                    .collect::<Result<_, _>>()?,
            },
            "leader" => FdOutput::Omega {
                leader: ident(field(s, "leader")?)?,
            },
            "a_leader" => FdOutput::AOmega {
                a_leader: field(s, "a_leader")?
                    .parse()
                    .map_err(|_| perr(s, "bad boolean"))?,
            },
            "anap" => FdOutput::ApBar {
                anap: field(s, "anap")?
                    .parse()
                    .map_err(|_| perr(s, "bad integer"))?,
            },
            "a_sigma" => {
                let mut a_sigma = BTreeSet::new();
                for item in list_items(field(s, "a_sigma")?, '{', '}')? {
                    let (x, y) = pair_parts(item)?;
                    a_sigma.insert((x.parse()?, y.parse().map_err(|_| perr(s, "bad integer"))?));
                }
                FdOutput::ASigma { a_sigma }
            }
            "h_leader" => {
                let (a, b) = s
                    .split_once(' ')
                    .ok_or_else(|| perr(s, "expected two fields"))?;
                FdOutput::HOmega {
                    leader: ident(field(a, "h_leader")?)?,
                    multiplicity: field(b, "h_multiplicity")?
                        .parse()
                        .map_err(|_| perr(s, "bad integer"))?,
                }
            }
            "h_quora" => {
                let (a, b) = s
                    .split_once(' ')
                    .ok_or_else(|| perr(s, "expected two fields"))?;
                let mut quora = BTreeSet::new();
                for item in list_items(field(a, "h_quora")?, '{', '}')? {
                    let (x, m) = pair_parts(item)?;
                    quora.insert((x.parse()?, m.parse().map_err(|_| perr(s, "bad multiset"))?));
                }
                let labels = list_items(field(b, "h_labels")?, '{', '}')?
                    .into_iter()
                    .map(str::parse)
                    .collect::<Result<_, _>>()?;
                FdOutput::HSigma { quora, labels }
            }
            "h_trusted" => FdOutput::Dhp {
                trusted: field(s, "h_trusted")?
                    .parse()
                    .map_err(|_| perr(s, "bad multiset"))?,
            },
            "alive" => FdOutput::Xi {
                alive: list_items(field(s, "alive")?, '[', ']')?
                    .into_iter()
                    .map(ident)
                    .collect::<Result<_, _>>()?,
            },
            _ => return Err(perr(s, "unknown output")),
        };
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Coord,
    Ph0,
    Ph1,
    Ph2,
    Decided,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Coord => "coord",
            Stage::Ph0 => "ph0",
            Stage::Ph1 => "ph1",
            Stage::Ph2 => "ph2",
            Stage::Decided => "decided",
        }
    }
}

impl FromStr for Stage {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "coord" => Stage::Coord,
            "ph0" => Stage::Ph0,
            "ph1" => Stage::Ph1,
            "ph2" => Stage::Ph2,
            "decided" => Stage::Decided,
            _ => return Err(perr(s, "unknown stage")),
        })
    }
}

/// Where a consensus automaton currently waits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub round: u64,
    pub stage: Stage,
    pub sub_round: u64,
}

impl fmt::Display for Progress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "round={} stage={} sr={}",
            self.round,
            self.stage.name(),
            self.sub_round
        )
    }
}

impl FromStr for Progress {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(' ').collect();
        let [r, st, sr] = parts.as_slice() else {
            return Err(perr(s, "expected three fields"));
        };
        Ok(Progress {
            round: field(r, "round")?
                .parse()
                .map_err(|_| perr(s, "bad round"))?,
            stage: field(st, "stage")?.parse()?,
            sub_round: field(sr, "sr")?
                .parse()
                .map_err(|_| perr(s, "bad sub-round"))?,
        })
    }
}

/// Anything a layer publishes as its output variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Fd(FdOutput),
    Progress(Progress),
}

impl Value {
    pub fn as_fd(&self) -> Option<&FdOutput> {
        match self {
            Value::Fd(o) => Some(o),
            Value::Progress(_) => None,
        }
    }

    pub fn as_progress(&self) -> Option<&Progress> {
        match self {
            Value::Progress(p) => Some(p),
            Value::Fd(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Fd(o) => o.fmt(f),
            Value::Progress(p) => p.fmt(f),
        }
    }
}

impl FromStr for Value {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("round=") {
            s.parse().map(Value::Progress)
        } else {
            s.parse().map(Value::Fd)
        }
    }
}
