use std::collections::{BTreeMap, BTreeSet};

use super::realizations::{disjoint_picks, disjoint_realizations};
use super::{at, CheckContext, Verdict};
use crate::kernel::Trace;
use crate::model::{identity_multiset, IdMultiset, Identity, ProcessKey, Time};
use crate::output::{FdClass, FdOutput, Label};

struct Snap {
    key: ProcessKey,
    time: Time,
    seq: u64,
    out: FdOutput,
}

impl Snap {
    fn at(&self) -> String {
        at(self.key, self.time, self.seq)
    }
}

type Histories = BTreeMap<ProcessKey, Vec<Snap>>;

fn histories(trace: &Trace, stream: &str, class: FdClass) -> Result<Histories, String> {
    let mut out = Histories::new();
    for (key, h) in trace.history(stream) {
        let mut v = Vec::with_capacity(h.len());
        for (time, seq, value) in h {
            match value.as_fd() {
                Some(o) if o.class() == class => v.push(Snap {
                    key,
                    time,
                    seq,
                    out: o.clone(),
                }),
                _ => {
                    return Err(format!(
                        "{} carries `{value}`, not {class}",
                        at(key, time, seq)
                    ))
                }
            }
        }
        out.insert(key, v);
    }
    Ok(out)
}

/// Values in force from the window start on: the last one set before the
/// window and all later ones.
fn window(h: &[Snap], start: Time) -> &[Snap] {
    let first_in = h.partition_point(|s| s.time < start);
    &h[first_in.saturating_sub(1)..]
}

/// Runs `cond` on every window value of every correct process.
fn over_window(
    hs: &Histories,
    ctx: &CheckContext,
    mut cond: impl FnMut(&Snap) -> Result<(), String>,
) -> Result<(), String> {
    for p in ctx.correct() {
        let Some(h) = hs.get(&p).filter(|h| !h.is_empty()) else {
            return Err(format!("{p} never set an output"));
        };
        for s in window(h, ctx.window_start) {
            cond(s).map_err(|e| format!("{}: {e}", s.at()))?;
        }
    }
    Ok(())
}

fn all_snaps(hs: &Histories) -> impl Iterator<Item = &Snap> {
    hs.values().flatten()
}

/// Class properties of the output stream `stream`, which must carry `class`.
pub fn check_class(
    trace: &Trace,
    class: FdClass,
    stream: &str,
    ctx: &CheckContext,
) -> Vec<Verdict> {
    let names: &[&str] = match class {
        FdClass::Sigma => &["safety", "liveness"],
        FdClass::Omega | FdClass::AOmega | FdClass::HOmega => &["election"],
        FdClass::ApBar => &["safety", "liveness"],
        FdClass::ASigma | FdClass::HSigma => &["validity", "monotonicity", "liveness", "safety"],
        FdClass::Dhp | FdClass::Xi => &["liveness"],
    };
    let prop = |name: &str| format!("{stream}:{name}");
    let hs = match histories(trace, stream, class) {
        Ok(hs) if hs.is_empty() => {
            return names
                .iter()
                .map(|n| Verdict::inconclusive(prop(n), "no output recorded"))
                .collect()
        }
        Ok(hs) => hs,
        Err(w) => {
            return names
                .iter()
                .map(|n| Verdict::fail(prop(n), w.clone()))
                .collect()
        }
    };
    if matches!(class, FdClass::Sigma | FdClass::Omega | FdClass::Xi) && !ctx.spec.has_unique_ids()
    {
        return names
            .iter()
            .map(|n| Verdict::inconclusive(prop(n), "class defined for unique identifiers only"))
            .collect();
    }
    let correct_ids = ctx.pattern.correct_ids(&ctx.spec);
    let perpetual = |name: &str, r: Result<(), String>| match r {
        Ok(()) => Verdict::pass(prop(name)),
        Err(w) => Verdict::fail(prop(name), w),
    };
    match class {
        FdClass::Sigma => vec![
            perpetual("safety", sigma_safety(&hs)),
            ctx.eventual(
                prop("liveness"),
                over_window(&hs, ctx, |s| {
                    let FdOutput::Sigma { trusted } = &s.out else {
                        unreachable!()
                    };
                    let allowed = correct_ids.to_set();
                    match trusted.iter().find(|i| !allowed.contains(i)) {
                        None => Ok(()),
                        Some(i) => {
                            Err(format!("trusts {i}, not the identity of a correct process"))
                        }
                    }
                }),
            ),
        ],
        FdClass::Omega => vec![ctx.eventual(
            prop("election"),
            agree_on(&hs, ctx, |o| match o {
                FdOutput::Omega { leader } => (leader.clone(), correct_ids.multiplicity(leader)),
                _ => unreachable!(),
            })
            .and_then(|(leader, _)| {
                if correct_ids.multiplicity(&leader) > 0 {
                    Ok(())
                } else {
                    Err(format!("common leader {leader} is not correct"))
                }
            }),
        )],
        FdClass::HOmega => vec![ctx.eventual(
            prop("election"),
            agree_on(&hs, ctx, |o| match o {
                FdOutput::HOmega {
                    leader,
                    multiplicity,
                } => (leader.clone(), *multiplicity),
                _ => unreachable!(),
            })
            .and_then(|(leader, mult)| {
                let want = correct_ids.multiplicity(&leader);
                if want == 0 {
                    Err(format!("common leader {leader} is not correct"))
                } else if mult != want {
                    Err(format!(
                        "multiplicity {mult} for {leader}, {want} correct processes carry it"
                    ))
                } else {
                    Ok(())
                }
            }),
        )],
        FdClass::AOmega => vec![ctx.eventual(prop("election"), aomega_election(&hs, ctx))],
        FdClass::ApBar => vec![
            perpetual(
                "safety",
                all_snaps(&hs).try_for_each(|s| {
                    let FdOutput::ApBar { anap } = s.out else {
                        unreachable!()
                    };
                    let alive = ctx.pattern.alive_count(&ctx.spec, s.time);
                    if anap >= alive {
                        Ok(())
                    } else {
                        Err(format!("{}: anap={anap} below {alive} alive", s.at()))
                    }
                }),
            ),
            ctx.eventual(
                prop("liveness"),
                over_window(&hs, ctx, |s| {
                    let FdOutput::ApBar { anap } = s.out else {
                        unreachable!()
                    };
                    let c = correct_ids.len();
                    if anap == c {
                        Ok(())
                    } else {
                        Err(format!("anap={anap}, {c} processes are correct"))
                    }
                }),
            ),
        ],
        FdClass::ASigma => {
            let part = asigma_participation(&hs);
            let correct = ctx.correct();
            vec![
                perpetual(
                    "validity",
                    all_snaps(&hs)
                        .try_for_each(|s| duplicate_label(s, asigma_pairs(&s.out).map(|(x, _)| x))),
                ),
                perpetual(
                    "monotonicity",
                    consecutive(&hs, |a, b| {
                        for (x, y) in asigma_pairs(&a.out) {
                            if !asigma_pairs(&b.out).any(|(x2, y2)| x2 == x && y2 <= y) {
                                return Err(format!("({x},{y}) not kept or shrunk"));
                            }
                        }
                        Ok(())
                    }),
                ),
                ctx.eventual(
                    prop("liveness"),
                    over_window(&hs, ctx, |s| {
                        let ok = asigma_pairs(&s.out).any(|(x, y)| {
                            part.get(x)
                                .map_or(0, |sx| sx.intersection(&correct).count())
                                >= y
                        });
                        if ok {
                            Ok(())
                        } else {
                            Err(format!(
                                "no pair backed by enough correct participants in {}",
                                s.out
                            ))
                        }
                    }),
                ),
                perpetual("safety", asigma_safety(&hs, &part)),
            ]
        }
        FdClass::HSigma => {
            let part = hsigma_participation(&hs);
            let correct = ctx.correct();
            vec![
                perpetual(
                    "validity",
                    all_snaps(&hs)
                        .try_for_each(|s| duplicate_label(s, hsigma_quora(&s.out).map(|(x, _)| x))),
                ),
                perpetual(
                    "monotonicity",
                    consecutive(&hs, |a, b| {
                        let (
                            FdOutput::HSigma { labels: la, .. },
                            FdOutput::HSigma { labels: lb, .. },
                        ) = (&a.out, &b.out)
                        else {
                            unreachable!()
                        };
                        if let Some(x) = la.difference(lb).next() {
                            return Err(format!("label {x} dropped"));
                        }
                        for (x, m) in hsigma_quora(&a.out) {
                            if !hsigma_quora(&b.out).any(|(x2, m2)| x2 == x && m2.is_included_in(m))
                            {
                                return Err(format!("({x},{m}) not kept or shrunk"));
                            }
                        }
                        Ok(())
                    }),
                ),
                ctx.eventual(
                    prop("liveness"),
                    over_window(&hs, ctx, |s| {
                        let ok = hsigma_quora(&s.out).any(|(x, m)| {
                            let live: Vec<ProcessKey> = part
                                .get(x)
                                .map(|sx| sx.intersection(&correct).copied().collect())
                                .unwrap_or_default();
                            m.is_included_in(
                                &identity_multiset(live.iter(), &ctx.spec).expect("keys in range"),
                            )
                        });
                        if ok {
                            Ok(())
                        } else {
                            Err(format!(
                                "no quorum realizable by correct participants in {}",
                                s.out
                            ))
                        }
                    }),
                ),
                perpetual("safety", hsigma_safety(&hs, &part, ctx)),
            ]
        }
        FdClass::Dhp => vec![ctx.eventual(
            prop("liveness"),
            over_window(&hs, ctx, |s| {
                let FdOutput::Dhp { trusted } = &s.out else {
                    unreachable!()
                };
                if *trusted == correct_ids {
                    Ok(())
                } else {
                    Err(format!(
                        "h_trusted={trusted}, correct identities are {correct_ids}"
                    ))
                }
            }),
        )],
        FdClass::Xi => vec![ctx.eventual(
            prop("liveness"),
            over_window(&hs, ctx, |s| {
                let FdOutput::Xi { alive } = &s.out else {
                    unreachable!()
                };
                let c = correct_ids.len();
                for (id, _) in correct_ids.iter() {
                    match alive.iter().position(|a| a == id) {
                        Some(pos) if pos < c => {}
                        Some(pos) => return Err(format!("{id} ranked {} > {c}", pos + 1)),
                        None => return Err(format!("{id} missing from alive")),
                    }
                }
                Ok(())
            }),
        )],
    }
}

/// The window value all correct processes agree on, as extracted by `key`.
fn agree_on<T: PartialEq>(
    hs: &Histories,
    ctx: &CheckContext,
    key: impl Fn(&FdOutput) -> T,
) -> Result<T, String> {
    let mut common: Option<(T, String)> = None;
    over_window(hs, ctx, |s| {
        let v = key(&s.out);
        match &common {
            None => {
                common = Some((v, format!("{} at {}", s.out, s.at())));
                Ok(())
            }
            Some((c, _)) if *c == v => Ok(()),
            Some((_, w)) => Err(format!("{} differs from {w}", s.out)),
        }
    })?;
    Ok(common.expect("at least one correct process").0)
}

fn aomega_election(hs: &Histories, ctx: &CheckContext) -> Result<(), String> {
    let mut leaders = Vec::new();
    for p in ctx.correct() {
        let h = hs
            .get(&p)
            .filter(|h| !h.is_empty())
            .ok_or(format!("{p} never set an output"))?;
        let w = window(h, ctx.window_start);
        let first = &w[0].out;
        if let Some(s) = w.iter().find(|s| s.out != *first) {
            return Err(format!("{}: a_leader changes inside the window", s.at()));
        }
        if *first == (FdOutput::AOmega { a_leader: true }) {
            leaders.push(p);
        }
    }
    match leaders.as_slice() {
        [_] => Ok(()),
        [] => Err("no correct process holds a_leader=true".into()),
        many => Err(format!(
            "{} correct processes hold a_leader=true",
            many.len()
        )),
    }
}

fn consecutive(
    hs: &Histories,
    mut cond: impl FnMut(&Snap, &Snap) -> Result<(), String>,
) -> Result<(), String> {
    for h in hs.values() {
        for pair in h.windows(2) {
            cond(&pair[0], &pair[1])
                .map_err(|e| format!("{} -> {}: {e}", pair[0].at(), pair[1].at()))?;
        }
    }
    Ok(())
}

fn duplicate_label<'a>(s: &Snap, labels: impl Iterator<Item = &'a Label>) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for x in labels {
        if !seen.insert(x) {
            return Err(format!("{}: two pairs labelled {x}", s.at()));
        }
    }
    Ok(())
}

fn sigma_safety(hs: &Histories) -> Result<(), String> {
    let mut distinct: BTreeMap<&BTreeSet<Identity>, String> = BTreeMap::new();
    for s in all_snaps(hs) {
        let FdOutput::Sigma { trusted } = &s.out else {
            unreachable!()
        };
        distinct.entry(trusted).or_insert_with(|| s.at());
    }
    let v: Vec<_> = distinct.into_iter().collect();
    for (i, (a, wa)) in v.iter().enumerate() {
        for (b, wb) in &v[i..] {
            if a.is_disjoint(b) {
                return Err(format!("{wa} and {wb} trust disjoint sets"));
            }
        }
    }
    Ok(())
}

fn asigma_pairs(o: &FdOutput) -> impl Iterator<Item = (&Label, usize)> {
    let FdOutput::ASigma { a_sigma } = o else {
        unreachable!()
    };
    a_sigma.iter().map(|(x, y)| (x, *y))
}

fn hsigma_quora(o: &FdOutput) -> impl Iterator<Item = &(Label, IdMultiset)> {
    let FdOutput::HSigma { quora, .. } = o else {
        unreachable!()
    };
    quora.iter()
}

type Participation = BTreeMap<Label, BTreeSet<ProcessKey>>;

fn asigma_participation(hs: &Histories) -> Participation {
    let mut part = Participation::new();
    for s in all_snaps(hs) {
        for (x, _) in asigma_pairs(&s.out) {
            part.entry(x.clone()).or_default().insert(s.key);
        }
    }
    part
}

fn hsigma_participation(hs: &Histories) -> Participation {
    let mut part = Participation::new();
    for s in all_snaps(hs) {
        let FdOutput::HSigma { labels, .. } = &s.out else {
            unreachable!()
        };
        for x in labels {
            part.entry(x.clone()).or_default().insert(s.key);
        }
    }
    part
}

fn asigma_safety(hs: &Histories, part: &Participation) -> Result<(), String> {
    let mut distinct: BTreeMap<(&Label, usize), String> = BTreeMap::new();
    for s in all_snaps(hs) {
        for p in asigma_pairs(&s.out) {
            distinct.entry(p).or_insert_with(|| s.at());
        }
    }
    let empty = BTreeSet::new();
    let v: Vec<_> = distinct.into_iter().collect();
    for (i, ((x1, y1), w1)) in v.iter().enumerate() {
        for ((x2, y2), w2) in &v[i..] {
            let s1 = part.get(*x1).unwrap_or(&empty);
            let s2 = part.get(*x2).unwrap_or(&empty);
            if disjoint_picks(*y1, s1, *y2, s2) {
                return Err(format!(
                    "({x1},{y1}) at {w1} and ({x2},{y2}) at {w2} admit disjoint sets among {} and {} participants",
                    s1.len(),
                    s2.len()
                ));
            }
        }
    }
    Ok(())
}

fn hsigma_safety(hs: &Histories, part: &Participation, ctx: &CheckContext) -> Result<(), String> {
    let mut distinct: BTreeMap<&(Label, IdMultiset), String> = BTreeMap::new();
    for s in all_snaps(hs) {
        for p in hsigma_quora(&s.out) {
            distinct.entry(p).or_insert_with(|| s.at());
        }
    }
    let empty = BTreeSet::new();
    let v: Vec<_> = distinct.into_iter().collect();
    for (i, ((x1, m1), w1)) in v.iter().enumerate() {
        for ((x2, m2), w2) in &v[i..] {
            let s1 = part.get(x1).unwrap_or(&empty);
            let s2 = part.get(x2).unwrap_or(&empty);
            if disjoint_realizations(m1, s1, m2, s2, &ctx.spec) {
                return Err(format!(
                    "({x1},{m1}) at {w1} and ({x2},{m2}) at {w2} have disjoint realizations"
                ));
            }
        }
    }
    Ok(())
}
