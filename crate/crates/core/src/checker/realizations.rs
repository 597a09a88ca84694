use std::collections::BTreeSet;

use crate::model::{IdMultiset, Identity, ProcessKey, SystemSpec};

/// Whether disjoint `Q1 ⊆ s1` and `Q2 ⊆ s2` exist with `I(Q1) = m1` and
/// `I(Q2) = m2`. Solved as a bipartite matching from identity slots to
/// processes, each process filling at most one slot.
pub fn disjoint_realizations(
    m1: &IdMultiset,
    s1: &BTreeSet<ProcessKey>,
    m2: &IdMultiset,
    s2: &BTreeSet<ProcessKey>,
    spec: &SystemSpec,
) -> bool {
    let mut slots: Vec<(&BTreeSet<ProcessKey>, &Identity)> = Vec::new();
    for (set, m) in [(s1, m1), (s2, m2)] {
        for (id, k) in m.iter() {
            slots.extend(std::iter::repeat_n((set, id), k));
        }
    }
    if slots.len() > s1.union(s2).count() {
        return false;
    }
    let candidates: Vec<Vec<usize>> = slots
        .iter()
        .map(|(set, id)| {
            set.iter()
                .filter(|p| spec.id(**p) == *id)
                .map(|p| p.0)
                .collect()
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; spec.n()];
    for slot in 0..slots.len() {
        let mut seen = vec![false; spec.n()];
        if !augment(slot, &candidates, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(
    slot: usize,
    candidates: &[Vec<usize>],
    owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &p in &candidates[slot] {
        if seen[p] {
            continue;
        }
        seen[p] = true;
        let free = match owner[p] {
            None => true,
            Some(other) => augment(other, candidates, owner, seen),
        };
        if free {
            owner[p] = Some(slot);
            return true;
        }
    }
    false
}

/// Whether disjoint sets of sizes `y1 ⊆ s1` and `y2 ⊆ s2` exist.
pub fn disjoint_picks(
    y1: usize,
    s1: &BTreeSet<ProcessKey>,
    y2: usize,
    s2: &BTreeSet<ProcessKey>,
) -> bool {
    y1 <= s1.len() && y2 <= s2.len() && y1 + y2 <= s1.union(s2).count()
}
