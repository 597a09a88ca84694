use std::collections::BTreeSet;

use homonym::model::{identity_multiset, IdMultiset, ProcessKey, SystemSpec};

/// Exhaustive search: each process of `S1 ∪ S2` goes to `Q1`, `Q2` or neither.
pub fn brute_force(
    m1: &IdMultiset,
    s1: &BTreeSet<ProcessKey>,
    m2: &IdMultiset,
    s2: &BTreeSet<ProcessKey>,
    spec: &SystemSpec,
) -> bool {
    let pool: Vec<ProcessKey> = s1.union(s2).copied().collect();
    let mut choice = vec![0u8; pool.len()];
    loop {
        let pick = |side: u8, set: &BTreeSet<ProcessKey>| -> Option<IdMultiset> {
            let keys: Vec<&ProcessKey> = pool
                .iter()
                .zip(&choice)
                .filter(|(_, c)| **c == side)
                .map(|(k, _)| k)
                .collect();
            keys.iter()
                .all(|k| set.contains(k))
                .then(|| identity_multiset(keys, spec).unwrap())
        };
        if pick(1, s1).as_ref() == Some(m1) && pick(2, s2).as_ref() == Some(m2) {
            return true;
        }
        let Some(i) = choice.iter().position(|c| *c < 2) else {
            return false;
        };
        choice[i] += 1;
        choice[..i].iter_mut().for_each(|c| *c = 0);
    }
}
