//! Matching received phase messages against the quora of an HΣ detector.

use std::collections::{BTreeMap, BTreeSet};

use crate::message::Est;
use crate::model::{IdMultiset, Identity};
use crate::output::Label;

/// A buffered phase message of the quorum-based consensus, in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub id: Identity,
    pub sr: u64,
    pub labels: BTreeSet<Label>,
    pub est: Est,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuorumMatch {
    pub label: Label,
    pub mset: IdMultiset,
    pub sr: u64,
    /// Indices into the buffer, ascending.
    pub members: Vec<usize>,
}

/// First `(label, mset)` of `quora` (in set order) and sub-round for which the
/// buffer holds messages carrying the label whose sender identities are
/// exactly `mset`. Per identity the earliest arrivals are used. Empty
/// quora never match.
pub fn quorum_match(
    quora: &BTreeSet<(Label, IdMultiset)>,
    buffer: &[Tagged],
) -> Option<QuorumMatch> {
    let subrounds: BTreeSet<u64> = buffer.iter().map(|m| m.sr).collect();
    for (x, mset) in quora {
        if mset.is_empty() {
            continue;
        }
        for &sr in &subrounds {
            let mut need: BTreeMap<&Identity, usize> = mset.iter().collect();
            let mut members = Vec::new();
            for (i, m) in buffer.iter().enumerate() {
                if m.sr != sr || !m.labels.contains(x) {
                    continue;
                }
                if let Some(k) = need.get_mut(&m.id) {
                    if *k > 0 {
                        *k -= 1;
                        members.push(i);
                    }
                }
            }
            if need.values().all(|k| *k == 0) {
                return Some(QuorumMatch {
                    label: x.clone(),
                    mset: mset.clone(),
                    sr,
                    members,
                });
            }
        }
    }
    None
}
