//! Concrete scenarios with known outcomes, run end to end.

use std::collections::BTreeMap;

use homonym::checker::{check_all, decision_rounds, Status, Verdict};
use homonym::kernel::{EventKind, Outcome, StepKind, Trace};
use homonym::model::{ProcessKey, Time};
use homonym::scenario::{run_scenario, Resolved, Scenario};

fn run(text: &str) -> (Resolved, Trace) {
    run_scenario(&Scenario::parse(text).unwrap()).unwrap()
}

fn verdict(vs: &[Verdict], property: &str) -> Status {
    vs.iter()
        .find(|v| v.property == property)
        .unwrap_or_else(|| panic!("no verdict for {property}"))
        .status
}

fn final_value(trace: &Trace, stream: &str, key: usize) -> String {
    trace.history(stream)[&ProcessKey(key)]
        .last()
        .unwrap()
        .2
        .to_string()
}

/// Values of `stream` at `key` from `from` on, including the one in force at `from`.
fn values_since(trace: &Trace, stream: &str, key: usize, from: Time) -> Vec<String> {
    let h = &trace.history(stream)[&ProcessKey(key)];
    let first = h.iter().rposition(|(t, _, _)| *t <= from).unwrap_or(0);
    h[first..].iter().map(|(_, _, v)| v.to_string()).collect()
}

fn decided(trace: &Trace) -> BTreeMap<usize, u64> {
    trace
        .decisions()
        .iter()
        .map(|e| match e.kind {
            EventKind::Decide(v) => (e.proc.0, v),
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn identical_scenarios_give_identical_traces() {
    let text = "[system]\nids = 1,1,2,3\n[failures]\ncrash = p3@12\n[timing]\nmodel = partial_sync\ngst = 15\np_lose = 0.4\n[stack]\nfd = dhp|homega_adapter\n[run]\nseed = 77\nhorizon = 150\n";
    assert_eq!(run(text).1.to_text(), run(text).1.to_text());
}

#[test]
fn crashed_process_is_silent_after_its_crash_in_every_model() {
    for timing in [
        "model = sync",
        "model = async\nmax_delay = 4",
        "model = partial_sync\ngst = 8",
    ] {
        let text = format!(
            "[system]\nn = 3\n[failures]\ncrash = p1@5\n[timing]\n{timing}\n[stack]\nfd = dhp\n[run]\nhorizon = 60\n"
        );
        let (_, trace) = run(&text);
        let p1: Vec<_> = trace
            .events
            .iter()
            .filter(|e| e.proc == ProcessKey(1))
            .collect();
        assert!(p1.iter().all(|e| e.time <= 5), "{timing}");
        assert!(matches!(p1.last().unwrap().kind, EventKind::Crash));
        let after: Vec<_> = trace
            .deliveries()
            .into_iter()
            .filter(|(e, _, _)| e.proc == ProcessKey(1))
            .collect();
        assert!(after.iter().all(|(e, _, _)| e.time <= 5));
    }
}

#[test]
fn single_process_sync_round_is_one_send_and_one_delivery() {
    let (_, trace) = run("[system]\nn = 1\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nhorizon = 20\nwindow = 5\n");
    for t in 2..19 {
        let at = |kind: &str| {
            trace
                .events
                .iter()
                .filter(|e| e.time == t && e.kind.name() == kind)
                .count()
        };
        assert_eq!((at("send"), at("deliver")), (1, 1), "time {t}");
    }
}

#[test]
fn sync_messages_arrive_at_the_next_round() {
    let (r, trace) = run("[system]\nids = 1,2,2,3\n[failures]\ncrash = p2@6\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nhorizon = 30\nwindow = 10\n");
    for e in trace.sends() {
        let EventKind::Send { partial, out, .. } = &e.kind else {
            unreachable!()
        };
        if *partial {
            continue;
        }
        for (k, o) in out.iter().enumerate() {
            if r.pattern.alive_at(ProcessKey(k), e.time + 1) {
                assert_eq!(*o, Outcome::At(e.time + 1));
            }
        }
    }
}

#[test]
fn polling_detector_converges_to_correct_identities() {
    let (r, trace) = run("[system]\nn = 3\nids = 1,1,2\n[failures]\ncrash = p1@10\n[timing]\nmodel = partial_sync\ngst = 20\ndelta = 3\n[stack]\nfd = dhp\n[run]\nseed = 1\nhorizon = 3000\nwindow = 500\n");
    let start = r.window_start();
    for p in [0, 2] {
        assert_eq!(
            values_since(&trace, "dhp", p, start),
            ["h_trusted=1^1+2^1"],
            "p{p}"
        );
    }
    let vs = check_all(&trace, &r);
    assert_eq!(verdict(&vs, "dhp:liveness"), Status::Pass);
}

#[test]
fn namesakes_get_one_reply_per_round_range() {
    let (_, trace) = run("[system]\nids = 1,1,2\n[timing]\nmodel = partial_sync\ngst = 10\ndelta = 2\n[stack]\nfd = dhp\n[run]\nseed = 4\nhorizon = 200\n");
    let mut covered: BTreeMap<(ProcessKey, String), Vec<(u64, u64)>> = BTreeMap::new();
    for e in trace.sends() {
        let EventKind::Send { payload, .. } = &e.kind else {
            unreachable!()
        };
        if let homonym::message::Message::PReply { lo, hi, dest, .. } = payload {
            covered
                .entry((e.proc, dest.to_string()))
                .or_default()
                .push((*lo, *hi));
        }
    }
    assert!(!covered.is_empty());
    for (who, mut ranges) in covered {
        ranges.sort();
        for w in ranges.windows(2) {
            assert!(w[0].1 < w[1].0, "{who:?} covers a round twice: {ranges:?}");
        }
    }
}

#[test]
fn sync_timeout_grows_then_stays() {
    let (_, trace) = run(
        "[system]\nids = 1,1,2\n[timing]\nmodel = sync\n[stack]\nfd = dhp\n[run]\nhorizon = 60\n",
    );
    for p in 0..3 {
        let fires: Vec<Time> = trace
            .events
            .iter()
            .filter(|e| e.proc == ProcessKey(p))
            .filter(|e| matches!(e.kind, EventKind::Step(StepKind::Timer { .. })))
            .map(|e| e.time)
            .collect();
        let mut waits: Vec<Time> = fires.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(waits.windows(2).all(|w| w[0] <= w[1]));
        // The round trip is two ticks, so the settled wait must cover it.
        assert!(*waits.last().unwrap() >= 2);
        waits.dedup();
        assert_eq!(waits, [1, 4, 7], "p{p}");
    }
}

#[test]
fn first_sync_round_sees_everyone() {
    let (_, trace) = run("[system]\nids = 1,1,2\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nhorizon = 10\nwindow = 3\n");
    for p in 0..3 {
        assert_eq!(
            values_since(&trace, "hsigma_sync", p, 2)[0],
            "h_quora={([1^2+2^1],1^2+2^1)} h_labels={[1^2+2^1]}"
        );
    }
}

#[test]
fn crash_mid_broadcast_splits_what_survivors_see() {
    let text = |seed: u64| {
        format!("[system]\nids = 1,1,2\n[failures]\ncrash = p1@2\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nseed = {seed}\nhorizon = 20\nwindow = 5\n")
    };
    let split = (0..200)
        .map(|seed| run(&text(seed)).1)
        .find(|trace| {
            trace.sends().any(|e| {
                e.proc == ProcessKey(1)
                    && e.time == 2
                    && matches!(&e.kind, EventKind::Send { partial: true, out, .. }
                        if out[0] != Outcome::Lost && out[2] == Outcome::Lost)
            })
        })
        .expect("some seed delivers the last broadcast to p0 only");
    let at3 = |p| values_since(&split, "hsigma_sync", p, 3)[0].clone();
    assert!(at3(0).contains("([1^2+2^1],1^2+2^1)"));
    assert!(at3(2).contains("([1^1+2^1],1^1+2^1)"));
    assert!(!at3(0).contains("([1^1+2^1],1^1+2^1)"));
}

#[test]
fn sync_quorum_detector_settles_on_correct_identities() {
    let (r, trace) = run("[system]\nids = 1,1,2,3\n[failures]\ncrash = p0@3\ncrash = p3@7\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nhorizon = 120\nwindow = 40\n");
    let vs = check_all(&trace, &r);
    assert!(vs.iter().all(|v| v.status == Status::Pass), "{vs:#?}");
    assert!(final_value(&trace, "hsigma_sync", 1).contains("([1^1+2^1],1^1+2^1)"));
}

#[test]
fn ranker_puts_correct_ids_first() {
    let (r, trace) = run("[system]\nids = 1,2,3\n[failures]\ncrash = p2@20\n[timing]\nmodel = async\nmax_delay = 3\n[stack]\nfd = xi\n[run]\nseed = 2\nhorizon = 300\nwindow = 100\n");
    for p in [0, 1] {
        for v in values_since(&trace, "xi", p, r.window_start()) {
            assert!(v.ends_with(",3]"), "p{p}: {v}");
        }
    }
    assert_eq!(verdict(&check_all(&trace, &r), "xi:liveness"), Status::Pass);
}

#[test]
fn lone_ranker_lists_itself() {
    let (_, trace) = run("[system]\nids = 9\n[timing]\nmodel = async\n[stack]\nfd = xi\n[run]\nhorizon = 50\nwindow = 10\n");
    let h = &trace.history("xi")[&ProcessKey(0)];
    let first = h
        .iter()
        .position(|(_, _, v)| v.to_string() == "alive=[9]")
        .unwrap();
    assert!(h[first..]
        .iter()
        .all(|(_, _, v)| v.to_string() == "alive=[9]"));
}

#[test]
fn ranker_reference_order() {
    let (_, trace) = run("[system]\nids = 1,2,3,4\n[failures]\ncrash = p2@15\n[timing]\nmodel = async\nmax_delay = 5\n[stack]\nfd = xi\n[run]\nseed = 3\nhorizon = 300\nwindow = 100\n");
    for p in [0, 1, 3] {
        assert_eq!(final_value(&trace, "xi", p), "alive=[4,2,1,3]");
    }
}

#[test]
fn ranked_quorum_selection_trusts_only_correct_ids() {
    let (r, trace) = run("[system]\nids = 1,2,3,4\n[failures]\ncrash = p3@10\n[timing]\nmodel = async\nmax_delay = 3\n[stack]\noracle = sigma:stabilize_at=20\noracle = xi:stabilize_at=20\nfd = sigma_to_hsigma_unknown|hsigma_to_sigma\n[run]\nseed = 6\nhorizon = 400\nwindow = 100\n");
    let vs = check_all(&trace, &r);
    assert!(vs.iter().all(|v| v.status == Status::Pass), "{vs:#?}");
    for p in 0..3 {
        for v in values_since(&trace, "hsigma_to_sigma", p, r.window_start()) {
            assert!(!v.contains('4'), "p{p}: {v}");
        }
    }
}

#[test]
fn alive_count_becomes_anonymous_correct_multiset() {
    let (r, trace) = run("[system]\nids = bot,bot,bot,bot\n[failures]\ncrash = p1@6\ncrash = p2@14\n[timing]\nmodel = async\n[stack]\noracle = apbar:stabilize_at=20\nfd = ap_to_dhp\n[run]\nhorizon = 200\nwindow = 60\n");
    for p in [0, 3] {
        assert_eq!(
            values_since(&trace, "ap_to_dhp", p, r.window_start()),
            ["h_trusted=bot^2"]
        );
    }
    assert_eq!(trace.sends().count(), 0);
}

#[test]
fn only_correct_processes_see_the_correct_count_label() {
    let (r, trace) = run("[system]\nids = bot,bot,bot,bot\n[failures]\ncrash = p1@6\ncrash = p2@14\n[timing]\nmodel = async\n[stack]\noracle = apbar:stabilize_at=20,noise=legal\nfd = ap_to_hsigma\n[run]\nseed = 5\nhorizon = 200\nwindow = 60\n");
    for (k, h) in trace.history("ap_to_hsigma") {
        let holds = h.iter().any(|(_, _, v)| v.to_string().contains("[bot^2]"));
        assert_eq!(holds, r.pattern.is_correct(k), "{k}");
    }
}

#[test]
fn unanimous_proposal_is_decided_by_majority_consensus() {
    let (r, trace) = run("[system]\nids = 1,1,2,3,3\n[failures]\nt = 2\ncrash = p2@9\n[timing]\nmodel = async\n[stack]\noracle = homega:stabilize_at=30\nconsensus = majority\n[inputs]\nproposals = 7,7,7,7,7\n[run]\nhorizon = 400\nwindow = 100\n");
    let d = decided(&trace);
    for k in r.pattern.correct(&r.scenario.spec) {
        assert_eq!(d.get(&k.0), Some(&7));
    }
}

#[test]
fn lone_process_decides_its_proposal_in_round_one() {
    let (_, trace) = run("[system]\nn = 1\n[failures]\nt = 0\n[timing]\nmodel = sync\n[stack]\noracle = homega\nconsensus = majority\n[inputs]\nproposals = 42\n");
    assert_eq!(decided(&trace), BTreeMap::from([(0, 42)]));
    assert_eq!(decision_rounds(&trace)[&ProcessKey(0)], 1);
}

#[test]
fn majority_consensus_reference_run() {
    let (r, trace) = run("[system]\nids = 1,1,2,3,3\n[failures]\nt = 2\n[timing]\nmodel = async\n[stack]\noracle = homega:stabilize_at=40\nconsensus = majority\n[inputs]\nproposals = 3,1,4,1,5\n[run]\nseed = 1\nhorizon = 400\nwindow = 100\n");
    // The namesake leaders with identity 1 proposed 3 and 1 and agree on the smaller.
    assert_eq!(decided(&trace), (0..5).map(|k| (k, 1)).collect());
    assert!(decision_rounds(&trace).values().all(|&round| round == 1));
    assert!(check_all(&trace, &r)
        .iter()
        .all(|v| v.status != Status::Fail));
}

#[test]
fn unanimous_proposal_is_decided_by_quorum_consensus() {
    let (r, trace) = run("[system]\nids = 1,2,2,3\n[failures]\ncrash = p0@4\ncrash = p2@11\n[timing]\nmodel = partial_sync\ngst = 15\np_lose = 0\n[stack]\noracle = homega:stabilize_at=20\noracle = hsigma:stabilize_at=20\nconsensus = quorum\n[inputs]\nproposals = 9,9,9,9\n[run]\nhorizon = 300\n");
    let d = decided(&trace);
    for k in r.pattern.correct(&r.scenario.spec) {
        assert_eq!(d.get(&k.0), Some(&9));
    }
}

#[test]
fn unanimous_proposal_is_decided_anonymously() {
    let (r, trace) = run("[system]\nids = bot,bot,bot\n[failures]\ncrash = p1@5\n[timing]\nmodel = async\n[stack]\noracle = aomega:stabilize_at=15\noracle = hsigma:stabilize_at=15\nconsensus = anonymous_quorum\n[inputs]\nproposals = 5,5,5\n[run]\nhorizon = 300\n");
    let d = decided(&trace);
    for k in r.pattern.correct(&r.scenario.spec) {
        assert_eq!(d.get(&k.0), Some(&5));
    }
}

#[test]
fn full_synchronous_stack_reference_runs() {
    // (seed, crashed process, crash time, decided value, round). The identity-1
    // leaders proposed 4 and 2, so 2 wins unless p1 crashes before coordinating.
    let expected = [
        (0, 1, 1, 4, 1),
        (1, 1, 4, 4, 1),
        (2, 1, 17, 2, 2),
        (3, 2, 14, 2, 2),
        (4, 3, 1, 4, 1),
    ];
    for (seed, crashed, at, value, round) in expected {
        let (r, trace) = run(&format!("[system]\nids = 1,1,2,2\n[failures]\nrandom_crashes = 1..1\ncrash_window = 1..20\n[timing]\nmodel = sync\n[stack]\nfd = dhp|homega_adapter\nfd = hsigma_sync\nconsensus = quorum\n[inputs]\nproposals = 4,2,7,2\n[run]\nseed = {seed}\nhorizon = 200\nwindow = 50\n"));
        assert_eq!(
            r.pattern.crashes().collect::<Vec<_>>(),
            [(ProcessKey(crashed), at)]
        );
        let d = decided(&trace);
        for k in r.pattern.correct(&r.scenario.spec) {
            assert_eq!(d[&k.0], value, "seed {seed}");
        }
        assert!(decision_rounds(&trace).values().all(|&x| x == round));
        assert!(check_all(&trace, &r)
            .iter()
            .all(|v| v.status == Status::Pass));
    }
}

#[test]
fn scenario_errors_name_line_and_key() {
    let e = Scenario::parse("[system]\nn = 2\nids = 1,1,2\n").unwrap_err();
    assert_eq!(e.key.as_deref(), Some("ids"));
    let e = Scenario::parse("[system]\nn = 4\n[failures]\nt = 2\n[stack]\noracle = homega\nconsensus = majority\n[inputs]\nproposals = 1,2,3,4\n").unwrap_err();
    assert!(e.to_string().contains("requires t < n/2"), "{e}");
    let e = Scenario::parse("[system]\nn = 2\nflavour = 3\n").unwrap_err();
    assert_eq!(e.line, Some(3));
}
