use std::collections::BTreeMap;

use super::{at, CheckContext, Verdict};
use crate::kernel::{EventKind, StepKind, Trace};
use crate::message::Message;
use crate::model::{ProcessKey, Time};
use crate::output::Stage;

/// `(seq, lo, hi)` of one reply carrying a round range.
type ReplyRange = (u64, u64, u64);

/// Progress checks of the polling detector: replies of crashed processes
/// stop covering the rounds of correct pollers, and eventually every round
/// of a correct poller collects a reply from every correct process in time.
pub fn check_dhp_lemmas(trace: &Trace, ctx: &CheckContext) -> Vec<Verdict> {
    let correct = ctx.correct();
    let mut last_round: BTreeMap<ProcessKey, u64> = BTreeMap::new();
    for e in trace.sends() {
        if let EventKind::Send {
            payload: Message::Polling { r, .. },
            ..
        } = &e.kind
        {
            let v = last_round.entry(e.proc).or_default();
            *v = (*v).max(*r);
        }
    }
    // Replies addressed to each receiver's identity: (receiver, sender) -> (seq, lo, hi).
    let mut replies: BTreeMap<(ProcessKey, ProcessKey), Vec<ReplyRange>> = BTreeMap::new();
    for (e, from, msg) in trace.deliveries() {
        if let Message::PReply { lo, hi, dest, .. } = msg {
            if dest == ctx.spec.id(e.proc) {
                replies
                    .entry((e.proc, from))
                    .or_default()
                    .push((e.seq, *lo, *hi));
            }
        }
    }

    let mut ceased = Ok(());
    'outer: for &p in &correct {
        let reached = last_round.get(&p).copied().unwrap_or(0);
        for q in ctx.pattern.faulty() {
            let covered = replies
                .get(&(p, q))
                .and_then(|v| v.iter().map(|r| r.2).max())
                .unwrap_or(0);
            if covered >= reached {
                ceased = Err(format!(
                    "{p} reached round {reached} but crashed {q} covered round {covered}"
                ));
                break 'outer;
            }
        }
    }

    let mut timely = Ok(());
    let mut checked = 0usize;
    'rounds: for e in &trace.events {
        let EventKind::Step(StepKind::Timer { layer, tag }) = &e.kind else {
            continue;
        };
        if layer != "dhp" || e.time < ctx.window_start || !correct.contains(&e.proc) {
            continue;
        }
        checked += 1;
        for &q in &correct {
            let ok = replies.get(&(e.proc, q)).is_some_and(|v| {
                v.iter()
                    .any(|&(seq, lo, hi)| seq < e.seq && lo <= *tag && *tag <= hi)
            });
            if !ok {
                timely = Err(format!(
                    "{} closed round {tag} without a reply from {q}",
                    at(e.proc, e.time, e.seq)
                ));
                break 'rounds;
            }
        }
    }
    if checked == 0 && timely.is_ok() {
        timely = Err("no round closed inside the window".into());
    }
    vec![
        ctx.eventual("dhp:faulty_replies_cease".into(), ceased),
        ctx.eventual("dhp:correct_replies_timely".into(), timely),
    ]
}

fn round_of(msg: &Message) -> Option<u64> {
    match msg {
        Message::Coord { r, .. } | Message::Ph0 { r, .. } | Message::Phase { r, .. } => Some(*r),
        _ => None,
    }
}

/// Progress lemmas of the consensus automata: nobody stays blocked in the
/// leaders' phases or in one phase loop through the final window, and once
/// the detectors are stable every round carries a single phase-0 value.
pub fn check_consensus_lemmas(trace: &Trace, ctx: &CheckContext) -> Vec<Verdict> {
    let hist = trace.history("consensus");
    let stuck = |stages: &[Stage]| -> Result<(), String> {
        for p in ctx.correct() {
            let Some(h) = hist.get(&p) else {
                return Err(format!("{p} never reported progress"));
            };
            let first_in = h.partition_point(|(t, _, _)| *t < ctx.window_start);
            let w = &h[first_in.saturating_sub(1)..];
            let progress: Vec<_> = w.iter().filter_map(|(_, _, v)| v.as_progress()).collect();
            let Some(head) = progress.first() else {
                continue;
            };
            let same = progress
                .iter()
                .all(|x| x.round == head.round && x.stage == head.stage);
            if same && stages.contains(&head.stage) {
                return Err(format!(
                    "{p} stays in round {} stage {} through the window",
                    head.round,
                    head.stage.name()
                ));
            }
        }
        Ok(())
    };

    let threshold: Time = ctx.stable_from + ctx.settle_len;
    let mut started: BTreeMap<u64, Time> = BTreeMap::new();
    let mut ph0: BTreeMap<u64, Vec<(String, u64)>> = BTreeMap::new();
    for e in trace.sends() {
        let EventKind::Send { payload, .. } = &e.kind else {
            continue;
        };
        if let Some(r) = round_of(payload) {
            started.entry(r).or_insert(e.time);
        }
        if let Message::Ph0 { r, est } = payload {
            ph0.entry(*r)
                .or_default()
                .push((at(e.proc, e.time, e.seq), *est));
        }
    }
    let mut same_value = Ok(());
    let mut rounds = 0usize;
    for (r, sends) in &ph0 {
        if started.get(r).is_none_or(|t| *t < threshold) {
            continue;
        }
        rounds += 1;
        if let Some((w, v)) = sends.iter().find(|(_, v)| *v != sends[0].1) {
            same_value = Err(format!(
                "round {r}: {} sent {} but {w} sent {v}",
                sends[0].0, sends[0].1
            ));
            break;
        }
    }
    let phase0 = if rounds == 0 {
        Verdict::new(
            "consensus:phase0_same_value",
            super::Status::Pass,
            format!("vacuous: no round began after {threshold}"),
        )
    } else {
        ctx.eventual("consensus:phase0_same_value".into(), same_value)
    };

    vec![
        ctx.eventual(
            "consensus:coordination_progress".into(),
            stuck(&[Stage::Coord, Stage::Ph0]),
        ),
        ctx.eventual(
            "consensus:loop_progress".into(),
            stuck(&[Stage::Ph1, Stage::Ph2]),
        ),
        phase0,
    ]
}
