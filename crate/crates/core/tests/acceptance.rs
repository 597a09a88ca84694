//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use homonym::checker::{check_all, disjoint_realizations, Status, Verdict};
use homonym::kernel::{EventKind, Outcome, Trace};
use homonym::model::{IdMultiset, Identity, ProcessKey, SystemSpec};
use homonym::scenario::{run_scenario, Resolved, Scenario};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const FD_BUDGET: Duration = Duration::from_secs(120);
const CONSENSUS_BUDGET: Duration = Duration::from_secs(300);

struct Criterion {
    ok: bool,
    detail: String,
}

fn criterion(ok: bool, detail: impl Into<String>) -> Criterion {
    Criterion {
        ok,
        detail: detail.into(),
    }
}

fn rng(family: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(family << 32 | seed)
}

/// `n` identities from a small pool, with at least one pair of namesakes.
fn homonymous_ids(rng: &mut ChaCha8Rng, n: usize) -> String {
    let pool = (n as u64).div_ceil(2).max(1);
    let mut ids: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=pool)).collect();
    if n > 1 {
        ids[1] = ids[0];
        ids.shuffle(rng);
    }
    join(ids)
}

fn unique_ids(n: usize) -> String {
    join(1..=n)
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn run(text: &str) -> (Resolved, Trace, Vec<Verdict>) {
    let scenario = Scenario::parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    let (r, trace) = run_scenario(&scenario).unwrap();
    let verdicts = check_all(&trace, &r);
    (r, trace, verdicts)
}

fn status(vs: &[Verdict], property: &str) -> Status {
    vs.iter()
        .find(|v| v.property == property)
        .unwrap_or_else(|| panic!("no verdict for {property}"))
        .status
}

/// Runs `count` generated scenarios in parallel and keeps `summary(run)` for each.
fn sweep<T: Send>(
    count: u64,
    make: impl Fn(u64) -> String + Sync,
    summary: impl Fn(&Resolved, &Trace, &[Verdict]) -> T + Sync,
) -> Vec<T> {
    (0..count)
        .into_par_iter()
        .map(|seed| {
            let (r, t, v) = run(&make(seed));
            summary(&r, &t, &v)
        })
        .collect()
}

fn polling_scenario(seed: u64) -> String {
    let mut g = rng(1, seed);
    let n = g.gen_range(2..=6);
    format!(
        "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..80\n[timing]\nmodel = partial_sync\ngst = {}\ndelta = {}\nstep_gap = {}\np_lose = {}\n[stack]\nfd = dhp|homega_adapter\n[run]\nseed = {seed}\nhorizon = 3000\nwindow = 500\n",
        homonymous_ids(&mut g, n),
        n - 1,
        g.gen_range(0..=50),
        g.gen_range(1..=5),
        g.gen_range(1..=3),
        ["0", "0.3", "0.5"][g.gen_range(0..3)],
    )
}

fn polling_detector() -> (Criterion, Criterion) {
    let start = Instant::now();
    let runs = sweep(200, polling_scenario, |_, _, v| {
        (
            status(v, "dhp:liveness"),
            status(v, "homega_adapter:election"),
        )
    });
    let took = start.elapsed();
    let trusted = runs.iter().filter(|r| r.0 == Status::Pass).count();
    let leader = runs.iter().filter(|r| r.1 == Status::Pass).count();
    let fast = took < FD_BUDGET;
    (
        criterion(
            trusted == 200 && fast,
            format!("h_trusted = I(Correct) over the window in {trusted}/200 runs, {took:.1?} for both sweeps"),
        ),
        criterion(
            leader == 200 && fast,
            format!("stable common leader with correct multiplicity in {leader}/200 runs"),
        ),
    )
}

/// Whether a crashing broadcast reached some but not all of its live receivers.
fn split_delivery(r: &Resolved, trace: &Trace) -> bool {
    trace.sends().any(|e| match &e.kind {
        EventKind::Send {
            partial: true, out, ..
        } => {
            let live: Vec<&Outcome> = out
                .iter()
                .enumerate()
                .filter(|(k, _)| r.pattern.alive_at(ProcessKey(*k), e.time + 1))
                .map(|(_, o)| o)
                .collect();
            live.iter().any(|o| **o == Outcome::Lost) && live.iter().any(|o| **o != Outcome::Lost)
        }
        _ => false,
    })
}

fn sync_quorum_detector() -> Criterion {
    let runs = sweep(
        200,
        |seed| {
            let mut g = rng(3, seed);
            let n = g.gen_range(2..=6);
            format!(
                "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..12\n[timing]\nmodel = sync\n[stack]\nfd = hsigma_sync\n[run]\nseed = {seed}\nhorizon = 200\nwindow = 60\n",
                homonymous_ids(&mut g, n),
                n - 1
            )
        },
        |r, t, v| {
            let all = ["validity", "monotonicity", "liveness", "safety"]
                .iter()
                .all(|p| status(v, &format!("hsigma_sync:{p}")) == Status::Pass);
            (all, split_delivery(r, t))
        },
    );
    let pass = runs.iter().filter(|r| r.0).count();
    let split = runs.iter().filter(|r| r.1).count();
    criterion(
        pass == 200 && split >= 20,
        format!("all four quorum properties in {pass}/200 runs, {split} runs with a split crashing broadcast"),
    )
}

fn ranker() -> Criterion {
    let runs = sweep(
        100,
        |seed| {
            let mut g = rng(4, seed);
            let n = g.gen_range(2..=6);
            format!(
                "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..60\n[timing]\nmodel = async\nmax_delay = {}\nstep_gap = {}\n[stack]\nfd = xi\n[run]\nseed = {seed}\nhorizon = 800\nwindow = 200\n",
                unique_ids(n),
                n - 1,
                g.gen_range(1..=5),
                g.gen_range(1..=3)
            )
        },
        |_, _, v| status(v, "xi:liveness") == Status::Pass,
    );
    let pass = runs.iter().filter(|ok| **ok).count();
    criterion(
        pass == 100,
        format!("correct ids ranked within |Correct| in {pass}/100 runs"),
    )
}

struct Reduction {
    stage: &'static str,
    oracles: &'static [&'static str],
    anonymous: bool,
    silent: bool,
}

const REDUCTIONS: [Reduction; 6] = [
    Reduction {
        stage: "sigma_to_hsigma_known",
        oracles: &["sigma"],
        anonymous: false,
        silent: true,
    },
    Reduction {
        stage: "sigma_to_hsigma_unknown",
        oracles: &["sigma"],
        anonymous: false,
        silent: false,
    },
    Reduction {
        stage: "hsigma_to_sigma",
        oracles: &["hsigma", "xi"],
        anonymous: false,
        silent: false,
    },
    Reduction {
        stage: "asigma_to_hsigma",
        oracles: &["asigma"],
        anonymous: true,
        silent: true,
    },
    Reduction {
        stage: "ap_to_dhp",
        oracles: &["apbar"],
        anonymous: true,
        silent: true,
    },
    Reduction {
        stage: "ap_to_hsigma",
        oracles: &["apbar"],
        anonymous: true,
        silent: true,
    },
];

fn oracle_stack_scenario(
    family: u64,
    seed: u64,
    oracles: &[&str],
    anonymous: bool,
    fd: &str,
) -> String {
    let mut g = rng(family, seed);
    let n = g.gen_range(2..=6);
    let ids = if anonymous {
        join(vec!["bot"; n])
    } else {
        unique_ids(n)
    };
    let stab: u64 = g.gen_range(0..=80);
    let oracle_lines: String = oracles
        .iter()
        .map(|o| format!("oracle = {o}:stabilize_at={stab}\n"))
        .collect();
    format!(
        "[system]\nids = {ids}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..60\n[timing]\nmodel = async\nmax_delay = {}\nstep_gap = 2\n[stack]\n{oracle_lines}fd = {fd}\n[run]\nseed = {seed}\nhorizon = 800\nwindow = 200\n",
        n - 1,
        g.gen_range(1..=4),
    )
}

fn reductions() -> Criterion {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, red) in REDUCTIONS.iter().enumerate() {
        let runs = sweep(
            100,
            |seed| {
                oracle_stack_scenario(50 + i as u64, seed, red.oracles, red.anonymous, red.stage)
            },
            |_, t, v| {
                let prefix = format!("{}:", red.stage);
                let pass = v
                    .iter()
                    .filter(|x| x.property.starts_with(&prefix))
                    .all(|x| x.status == Status::Pass);
                (pass, t.sends().count())
            },
        );
        let pass = runs.iter().filter(|r| r.0).count();
        let sends: usize = runs.iter().map(|r| r.1).sum();
        ok &= pass == 100 && (!red.silent || sends == 0);
        parts.push(if red.silent {
            format!("{} {pass}/100 ({sends} sends)", red.stage)
        } else {
            format!("{} {pass}/100", red.stage)
        });
    }
    criterion(ok, parts.join(", "))
}

fn round_trip() -> Criterion {
    let runs = sweep(
        100,
        |seed| {
            oracle_stack_scenario(
                6,
                seed,
                &["sigma", "xi"],
                false,
                "sigma_to_hsigma_unknown|hsigma_to_sigma",
            )
        },
        |_, _, v| {
            ["safety", "liveness"]
                .iter()
                .all(|p| status(v, &format!("hsigma_to_sigma:{p}")) == Status::Pass)
        },
    );
    let pass = runs.iter().filter(|ok| **ok).count();
    criterion(
        pass == 100,
        format!("trusted-set properties after the round trip in {pass}/100 runs"),
    )
}

#[derive(Default)]
struct ConsensusTally {
    runs: usize,
    safe: usize,
    term_pass_conclusive: usize,
    conclusive: usize,
    term_fail: usize,
}

fn consensus_sweep(count: u64, make: impl Fn(u64) -> String + Sync) -> ConsensusTally {
    let runs = sweep(count, make, |r, _, v| {
        let safe = ["validity", "agreement", "integrity"]
            .iter()
            .all(|p| status(v, &format!("consensus:{p}")) == Status::Pass);
        (
            safe,
            r.window_conclusive(),
            status(v, "consensus:termination"),
        )
    });
    let mut t = ConsensusTally {
        runs: runs.len(),
        ..Default::default()
    };
    for (safe, conclusive, term) in runs {
        t.safe += safe as usize;
        t.conclusive += conclusive as usize;
        t.term_pass_conclusive += (conclusive && term == Status::Pass) as usize;
        t.term_fail += (term == Status::Fail) as usize;
    }
    t
}

impl ConsensusTally {
    fn ok(&self) -> bool {
        self.safe == self.runs
            && self.term_fail == 0
            && self.term_pass_conclusive == self.conclusive
    }

    fn describe(&self) -> String {
        format!(
            "safety {}/{}, termination {}/{} conclusive runs, {} FAIL",
            self.safe, self.runs, self.term_pass_conclusive, self.conclusive, self.term_fail
        )
    }
}

fn majority_consensus() -> Criterion {
    let start = Instant::now();
    let t = consensus_sweep(500, |seed| {
        let mut g = rng(7, seed);
        format!(
            "[system]\nids = {}\n[failures]\nt = 2\nrandom_crashes = 0..2\ncrash_window = 1..60\n[timing]\nmodel = async\nmax_delay = 4\nstep_gap = 2\n[stack]\noracle = homega:stabilize_at=0..60,noise=arbitrary\nconsensus = majority\n[inputs]\nproposals = {}\n[run]\nseed = {seed}\nhorizon = 600\nwindow = 150\n",
            homonymous_ids(&mut g, 5),
            join((0..5).map(|_| g.gen_range(0..10u64)))
        )
    });
    let took = start.elapsed();
    criterion(
        t.ok() && took < CONSENSUS_BUDGET,
        format!("{}, {took:.1?}", t.describe()),
    )
}

fn quorum_consensus() -> Criterion {
    let named = consensus_sweep(500, |seed| {
        let mut g = rng(8, seed);
        let n = g.gen_range(3..=6);
        format!(
            "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..60\n[timing]\nmodel = async\nmax_delay = 4\nstep_gap = 2\n[stack]\noracle = homega:stabilize_at=0..60,noise=arbitrary\noracle = hsigma:stabilize_at=0..60\nconsensus = quorum\n[inputs]\nproposals = {}\n[run]\nseed = {seed}\nhorizon = 800\nwindow = 200\n",
            homonymous_ids(&mut g, n),
            n - 1,
            join((0..n).map(|_| g.gen_range(0..10u64)))
        )
    });
    let anonymous = consensus_sweep(200, |seed| {
        let mut g = rng(80, seed);
        let n = g.gen_range(3..=6);
        format!(
            "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..60\n[timing]\nmodel = async\nmax_delay = 4\nstep_gap = 2\n[stack]\noracle = aomega:stabilize_at=0..60,noise=arbitrary\noracle = hsigma:stabilize_at=0..60\nconsensus = anonymous_quorum\n[inputs]\nproposals = {}\n[run]\nseed = {seed}\nhorizon = 800\nwindow = 200\n",
            join(vec!["bot"; n]),
            n - 1,
            join((0..n).map(|_| g.gen_range(0..10u64)))
        )
    });
    criterion(
        named.ok() && anonymous.ok(),
        format!(
            "homonymous: {}; anonymous: {}",
            named.describe(),
            anonymous.describe()
        ),
    )
}

fn full_stack() -> Criterion {
    let runs = sweep(
        200,
        |seed| {
            let mut g = rng(9, seed);
            let n = g.gen_range(2..=6);
            format!(
                "[system]\nids = {}\n[failures]\nrandom_crashes = 0..{}\ncrash_window = 1..30\n[timing]\nmodel = sync\n[stack]\nfd = dhp|homega_adapter\nfd = hsigma_sync\nconsensus = quorum\n[inputs]\nproposals = {}\n[run]\nseed = {seed}\nhorizon = 400\nwindow = 100\n",
                homonymous_ids(&mut g, n),
                n - 1,
                join((0..n).map(|_| g.gen_range(0..10u64)))
            )
        },
        |_, _, v| {
            ["validity", "agreement", "integrity", "termination"]
                .iter()
                .all(|p| status(v, &format!("consensus:{p}")) == Status::Pass)
        },
    );
    let pass = runs.iter().filter(|ok| **ok).count();
    criterion(
        pass == 200,
        format!("every correct process decided, safely, in {pass}/200 runs"),
    )
}

const FIXTURES: [(&str, &str); 11] = [
    ("sigma_safety", "oracle.sigma:safety"),
    ("apbar_safety", "oracle.apbar:safety"),
    ("asigma_safety", "oracle.asigma:safety"),
    ("hsigma_safety", "oracle.hsigma:safety"),
    ("hsigma_monotonicity", "oracle.hsigma:monotonicity"),
    ("hsigma_validity", "oracle.hsigma:validity"),
    ("dhp_liveness", "oracle.dhp:liveness"),
    ("homega_election", "oracle.homega:election"),
    ("consensus_agreement", "consensus:agreement"),
    ("consensus_validity", "consensus:validity"),
    ("consensus_integrity", "consensus:integrity"),
];

fn planted_violations() -> Criterion {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut caught = 0;
    let mut families = BTreeSet::new();
    let mut missed = Vec::new();
    for (name, property) in FIXTURES {
        let read = |ext: &str| std::fs::read_to_string(dir.join(format!("{name}.{ext}"))).unwrap();
        let resolved = Scenario::parse(&read("scn")).unwrap().resolve().unwrap();
        let vs = check_all(&Trace::parse(&read("trace")).unwrap(), &resolved);
        let fails: Vec<&Verdict> = vs.iter().filter(|v| v.status == Status::Fail).collect();
        if fails.len() == 1 && fails[0].property == property && fails[0].witness != "-" {
            caught += 1;
            families.insert(property.split(':').next().unwrap());
        } else {
            missed.push(name);
        }
    }
    criterion(
        caught == FIXTURES.len() && families.len() >= 6,
        format!(
            "{caught}/{} fixtures caught exactly, {} stream families{}",
            FIXTURES.len(),
            families.len(),
            if missed.is_empty() {
                String::new()
            } else {
                format!(", missed {missed:?}")
            }
        ),
    )
}

fn golden_corpus() -> Criterion {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut scenarios: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    scenarios.sort();
    let mut same = 0;
    let mut models = BTreeSet::new();
    for scn in &scenarios {
        let scenario = Scenario::parse(&std::fs::read_to_string(scn).unwrap()).unwrap();
        models.insert(scenario.timing.name());
        let (_, trace) = run_scenario(&scenario).unwrap();
        let stored = std::fs::read_to_string(scn.with_extension("trace")).unwrap_or_default();
        same += (stored == trace.to_text()) as usize;
    }
    criterion(
        same == scenarios.len() && same >= 10 && models.len() == 3,
        format!(
            "{same}/{} traces byte-identical across {} timing models",
            scenarios.len(),
            models.len()
        ),
    )
}

fn realization_oracle() -> Criterion {
    const INSTANCES: u64 = 12_000;
    let ids = [
        Identity::Bot,
        Identity::Id(1),
        Identity::Id(2),
        Identity::Id(3),
    ];
    let disagreements: u64 = (0..INSTANCES)
        .into_par_iter()
        .map(|seed| {
            let mut g = rng(12, seed);
            let n = g.gen_range(2..=8);
            let spec =
                SystemSpec::new((0..n).map(|_| ids[g.gen_range(0..4)].clone()).collect()).unwrap();
            let mut s1 = BTreeSet::new();
            let mut s2 = BTreeSet::new();
            for k in 0..n {
                if s1.len() + s2.len() < 8 && g.gen_bool(0.6) {
                    s1.insert(ProcessKey(k));
                }
                if s1.len() + s2.len() < 8 && g.gen_bool(0.6) {
                    s2.insert(ProcessKey(k));
                }
            }
            let draw = |g: &mut ChaCha8Rng| -> IdMultiset {
                (0..g.gen_range(0..=3))
                    .map(|_| ids[g.gen_range(0..4)].clone())
                    .collect()
            };
            let (m1, m2) = (draw(&mut g), draw(&mut g));
            let fast = disjoint_realizations(&m1, &s1, &m2, &s2, &spec);
            (fast != common::brute_force(&m1, &s1, &m2, &s2, &spec)) as u64
        })
        .sum();
    criterion(
        disagreements == 0,
        format!("{disagreements} disagreements with exhaustive search over {INSTANCES} instances"),
    )
}

fn main() {
    let (c1, c2) = polling_detector();
    let results = [
        ("1", "eventually perfect homonymous detector", c1),
        ("2", "homonymous leader through the adapter", c2),
        ("3", "synchronous quorum detector", sync_quorum_detector()),
        ("4", "ranked liveness", ranker()),
        ("5", "reductions", reductions()),
        ("6", "trusted-set round trip", round_trip()),
        ("7", "majority consensus", majority_consensus()),
        ("8", "quorum consensus", quorum_consensus()),
        ("9", "synchronous full stack", full_stack()),
        ("10", "planted violations", planted_violations()),
        ("11", "golden determinism", golden_corpus()),
        ("12", "realization matching", realization_oracle()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        let mark = if o.ok { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {mark} {name}: {}", o.detail);
        failed += (!o.ok) as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
