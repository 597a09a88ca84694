//! Round-based consensus driven by an eventual leader detector and, for the
//! quorum variants, an HΣ detector.
//!
//! All waits are guards over never-purged per-round buffers; [`Consensus::advance`]
//! re-evaluates them after every delivery and every detector change.

pub mod quorum;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::layer::{Cx, Layer};
use crate::message::{Est, Message, Phase, QuorumTag};
use crate::model::Identity;
use crate::output::{FdOutput, Label, Progress, Stage, Value};

pub use quorum::{quorum_match, QuorumMatch, Tagged};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Majority-based rounds; needs `t < n/2` and an HΩ detector.
    Majority { n: usize, t: usize },
    /// Quorum-based rounds with HΩ (input 0) and HΣ (input 1).
    Quorum,
    /// Quorum-based rounds with AΩ (input 0) and HΣ (input 1), no leader coordination.
    QuorumAnonymous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusKind {
    Majority,
    Quorum,
    AnonymousQuorum,
}

impl ConsensusKind {
    pub fn name(self) -> &'static str {
        match self {
            ConsensusKind::Majority => "majority",
            ConsensusKind::Quorum => "quorum",
            ConsensusKind::AnonymousQuorum => "anonymous_quorum",
        }
    }
}

impl fmt::Display for ConsensusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsensusKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" | "fig3" => Ok(ConsensusKind::Majority),
            "quorum" | "fig4" => Ok(ConsensusKind::Quorum),
            "anonymous_quorum" | "fig4_aomega" => Ok(ConsensusKind::AnonymousQuorum),
            _ => Err(format!("unknown consensus algorithm `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("majority consensus requires t < n/2 (n={n}, t={t})")]
    TooManyFaults { n: usize, t: usize },
}

#[derive(Debug, Default, Clone)]
struct RoundBuf {
    coord: Vec<(Identity, u64)>,
    ph0: Vec<u64>,
    ph1: Vec<Est>,
    ph2: Vec<Est>,
    tagged1: Vec<Tagged>,
    tagged2: Vec<Tagged>,
}

#[derive(Debug, Clone)]
pub struct Consensus {
    variant: Variant,
    id: Identity,
    est1: u64,
    est2: Est,
    r: u64,
    sr: u64,
    stage: Stage,
    current_labels: BTreeSet<Label>,
    rounds: BTreeMap<u64, RoundBuf>,
    decided: Option<u64>,
}

impl Consensus {
    pub fn new(variant: Variant, id: Identity, proposal: u64) -> Result<Self, ConsensusError> {
        if let Variant::Majority { n, t } = variant {
            if 2 * t >= n {
                return Err(ConsensusError::TooManyFaults { n, t });
            }
        }
        Ok(Self {
            variant,
            id,
            est1: proposal,
            est2: None,
            r: 0,
            sr: 0,
            stage: Stage::Coord,
            current_labels: BTreeSet::new(),
            rounds: BTreeMap::new(),
            decided: None,
        })
    }

    pub fn kind(&self) -> ConsensusKind {
        match self.variant {
            Variant::Majority { .. } => ConsensusKind::Majority,
            Variant::Quorum => ConsensusKind::Quorum,
            Variant::QuorumAnonymous => ConsensusKind::AnonymousQuorum,
        }
    }

    pub fn progress(&self) -> Progress {
        Progress {
            round: self.r,
            stage: self.stage,
            sub_round: self.sr,
        }
    }

    fn tagged(&self) -> bool {
        !matches!(self.variant, Variant::Majority { .. })
    }

    fn buf(&mut self, r: u64) -> &mut RoundBuf {
        self.rounds.entry(r).or_default()
    }

    fn cur(&self) -> Option<&RoundBuf> {
        self.rounds.get(&self.r)
    }

    fn is_leader(&self, cx: &Cx) -> bool {
        match cx.input(0) {
            Some(FdOutput::HOmega { leader, .. }) => *leader == self.id,
            Some(FdOutput::AOmega { a_leader }) => *a_leader,
            _ => false,
        }
    }

    fn labels_now(cx: &Cx) -> BTreeSet<Label> {
        match cx.input(1) {
            Some(FdOutput::HSigma { labels, .. }) => labels.clone(),
            _ => BTreeSet::new(),
        }
    }

    fn decide(&mut self, cx: &mut Cx, v: u64) {
        self.decided = Some(v);
        self.stage = Stage::Decided;
        cx.broadcast(Message::Decide(v));
    }

    fn start_round(&mut self, cx: &mut Cx) {
        self.r += 1;
        self.sr = 0;
        match self.variant {
            Variant::QuorumAnonymous => self.stage = Stage::Ph0,
            _ => {
                self.stage = Stage::Coord;
                cx.broadcast(Message::Coord {
                    id: self.id.clone(),
                    r: self.r,
                    est: self.est1,
                });
            }
        }
    }

    fn phase_msg(&self, phase: Phase, est: Est) -> Message {
        let tag = self.tagged().then(|| QuorumTag {
            id: self.id.clone(),
            sr: self.sr,
            labels: self.current_labels.clone(),
        });
        Message::Phase {
            phase,
            r: self.r,
            tag,
            est,
        }
    }

    fn enter_phase(&mut self, cx: &mut Cx, phase: Phase) {
        self.stage = match phase {
            Phase::One => Stage::Ph1,
            Phase::Two => Stage::Ph2,
        };
        if self.tagged() {
            self.sr = 1;
            self.current_labels = Self::labels_now(cx);
        }
        let est = match phase {
            Phase::One => Some(self.est1),
            Phase::Two => self.est2,
        };
        cx.broadcast(self.phase_msg(phase, est));
    }

    /// Sub-round bump of the quorum variants. Returns whether it fired.
    fn maybe_bump(&mut self, cx: &mut Cx, phase: Phase) -> bool {
        let labels = Self::labels_now(cx);
        let higher = self.cur().is_some_and(|b| {
            let msgs = match phase {
                Phase::One => &b.tagged1,
                Phase::Two => &b.tagged2,
            };
            msgs.iter().any(|m| m.sr > self.sr)
        });
        if labels == self.current_labels && !higher {
            return false;
        }
        self.sr += 1;
        self.current_labels = labels;
        let est = match phase {
            Phase::One => Some(self.est1),
            Phase::Two => self.est2,
        };
        cx.broadcast(self.phase_msg(phase, est));
        true
    }

    /// Outcome of a Phase-2 collection: decide, adopt, or move on.
    fn conclude(&mut self, cx: &mut Cx, rec: &BTreeSet<Est>) {
        let values: Vec<u64> = rec.iter().flatten().copied().collect();
        if let [v] = values.as_slice() {
            if rec.len() == 1 {
                self.decide(cx, *v);
                return;
            }
            self.est1 = *v;
        }
        self.start_round(cx);
    }

    fn quora(cx: &Cx) -> BTreeSet<(Label, crate::model::IdMultiset)> {
        match cx.input(1) {
            Some(FdOutput::HSigma { quora, .. }) => quora.clone(),
            _ => BTreeSet::new(),
        }
    }

    /// Runs every enabled step until the automaton blocks.
    pub fn advance(&mut self, cx: &mut Cx) {
        loop {
            if self.decided.is_some() {
                return;
            }
            match self.stage {
                Stage::Decided => return,
                Stage::Coord => {
                    let (leader, mult) = match cx.input(0) {
                        Some(FdOutput::HOmega {
                            leader,
                            multiplicity,
                        }) => (Some(leader.clone()), *multiplicity),
                        _ => (None, 0),
                    };
                    let own: Vec<u64> = self
                        .cur()
                        .map(|b| {
                            b.coord
                                .iter()
                                .filter(|(i, _)| *i == self.id)
                                .map(|(_, e)| *e)
                                .collect()
                        })
                        .unwrap_or_default();
                    if leader.as_ref() == Some(&self.id) && own.len() < mult {
                        return;
                    }
                    if let Some(min) = own.iter().min() {
                        self.est1 = *min;
                    }
                    self.stage = Stage::Ph0;
                }
                Stage::Ph0 => {
                    let got = self.cur().and_then(|b| b.ph0.first().copied());
                    if got.is_none() && !self.is_leader(cx) {
                        return;
                    }
                    if let Some(v) = got {
                        self.est1 = v;
                    }
                    cx.broadcast(Message::Ph0 {
                        r: self.r,
                        est: self.est1,
                    });
                    self.enter_phase(cx, Phase::One);
                }
                Stage::Ph1 => match self.variant {
                    Variant::Majority { n, t } => {
                        let Some(b) = self.cur() else { return };
                        if b.ph1.len() < n - t {
                            return;
                        }
                        let mut counts: BTreeMap<Est, usize> = BTreeMap::new();
                        for e in &b.ph1[..n - t] {
                            *counts.entry(*e).or_insert(0) += 1;
                        }
                        self.est2 = counts
                            .into_iter()
                            .find(|(_, c)| 2 * c > n)
                            .and_then(|(v, _)| v);
                        self.enter_phase(cx, Phase::Two);
                    }
                    _ => {
                        let quora = Self::quora(cx);
                        let b = self.cur();
                        if let Some(m) = b.and_then(|b| b.tagged2.first()) {
                            self.est2 = m.est;
                            self.enter_phase(cx, Phase::Two);
                        } else if let Some(q) = b.and_then(|b| quorum_match(&quora, &b.tagged1)) {
                            let b = self.cur().expect("matched");
                            let ests: BTreeSet<Est> =
                                q.members.iter().map(|&i| b.tagged1[i].est).collect();
                            self.est2 = if ests.len() == 1 {
                                *ests.iter().next().expect("nonempty")
                            } else {
                                None
                            };
                            self.enter_phase(cx, Phase::Two);
                        } else if !self.maybe_bump(cx, Phase::One) {
                            return;
                        }
                    }
                },
                Stage::Ph2 => match self.variant {
                    Variant::Majority { n, t } => {
                        let Some(b) = self.cur() else { return };
                        if b.ph2.len() < n - t {
                            return;
                        }
                        let rec: BTreeSet<Est> = b.ph2[..n - t].iter().copied().collect();
                        self.conclude(cx, &rec);
                    }
                    _ => {
                        let next = self.rounds.get(&(self.r + 1));
                        let moved_on = match self.variant {
                            Variant::QuorumAnonymous => next.is_some_and(|b| !b.ph0.is_empty()),
                            _ => next.is_some_and(|b| !b.coord.is_empty()),
                        };
                        if moved_on {
                            self.start_round(cx);
                            continue;
                        }
                        let quora = Self::quora(cx);
                        let found = self
                            .cur()
                            .and_then(|b| quorum_match(&quora, &b.tagged2).map(|q| (b, q)))
                            .map(|(b, q)| {
                                q.members
                                    .iter()
                                    .map(|&i| b.tagged2[i].est)
                                    .collect::<BTreeSet<Est>>()
                            });
                        if let Some(rec) = found {
                            self.conclude(cx, &rec);
                        } else if !self.maybe_bump(cx, Phase::Two) {
                            return;
                        }
                    }
                },
            }
        }
    }

    fn store(&mut self, msg: &Message) {
        match msg {
            Message::Coord { id, r, est } => self.buf(*r).coord.push((id.clone(), *est)),
            Message::Ph0 { r, est } => self.buf(*r).ph0.push(*est),
            Message::Phase { phase, r, tag, est } => {
                let b = self.buf(*r);
                match (phase, tag) {
                    (Phase::One, None) => b.ph1.push(*est),
                    (Phase::Two, None) => b.ph2.push(*est),
                    (p, Some(t)) => {
                        let m = Tagged {
                            id: t.id.clone(),
                            sr: t.sr,
                            labels: t.labels.clone(),
                            est: *est,
                        };
                        match p {
                            Phase::One => b.tagged1.push(m),
                            Phase::Two => b.tagged2.push(m),
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

impl Layer for Consensus {
    fn name(&self) -> &'static str {
        "consensus"
    }

    fn start(&mut self, cx: &mut Cx) {
        self.start_round(cx);
        self.advance(cx);
    }

    fn receive(&mut self, cx: &mut Cx, msg: &Message) {
        if let Message::Decide(v) = msg {
            if self.decided.is_none() {
                self.decide(cx, *v);
            }
            return;
        }
        self.store(msg);
        self.advance(cx);
    }

    fn inputs_changed(&mut self, cx: &mut Cx) {
        self.advance(cx);
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Progress(self.progress()))
    }

    fn decision(&self) -> Option<u64> {
        self.decided
    }
}
