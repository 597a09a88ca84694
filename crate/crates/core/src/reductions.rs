//! Transformations between detector classes. Each layer reads one detector
//! (and, for the HΣ to Σ direction, a Ξ detector) and publishes another.

use std::collections::{BTreeMap, BTreeSet};

use crate::layer::{Cx, Layer};
use crate::message::Message;
use crate::model::{IdMultiset, Identity};
use crate::output::{FdOutput, Label, Value};

/// Every subset of `ids` that contains `own`, as set labels.
pub fn labels_containing(ids: &BTreeSet<Identity>, own: &Identity) -> BTreeSet<Label> {
    let others: Vec<&Identity> = ids.iter().filter(|i| *i != own).collect();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << others.len()) {
        let mut m = IdMultiset::repeated(own.clone(), 1);
        for (b, id) in others.iter().enumerate() {
            if mask & (1 << b) != 0 {
                m.insert((*id).clone());
            }
        }
        out.insert(Label::Set(m));
    }
    out
}

fn hsigma_value(quora: &BTreeSet<(Label, IdMultiset)>, labels: &BTreeSet<Label>) -> Value {
    Value::Fd(FdOutput::HSigma {
        quora: quora.clone(),
        labels: labels.clone(),
    })
}

fn trusted_quorum(cx: &Cx) -> Option<(Label, IdMultiset)> {
    match cx.input(0) {
        Some(FdOutput::Sigma { trusted }) => {
            let m = IdMultiset::from_set(trusted);
            Some((Label::Set(m.clone()), m))
        }
        _ => None,
    }
}

/// Σ to HΣ when the membership is known up front.
#[derive(Debug, Clone)]
pub struct SigmaToHSigmaKnown {
    quora: BTreeSet<(Label, IdMultiset)>,
    labels: BTreeSet<Label>,
}

impl SigmaToHSigmaKnown {
    pub fn new(own: &Identity, membership: &IdMultiset) -> Self {
        Self {
            quora: BTreeSet::new(),
            labels: labels_containing(&membership.to_set(), own),
        }
    }
}

impl Layer for SigmaToHSigmaKnown {
    fn name(&self) -> &'static str {
        "sigma_to_hsigma_known"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        if let Some(pair) = trusted_quorum(cx) {
            self.quora.insert(pair);
        }
    }

    fn output(&self) -> Option<Value> {
        Some(hsigma_value(&self.quora, &self.labels))
    }
}

/// Σ to HΣ learning the membership from IDENT messages.
#[derive(Debug, Clone)]
pub struct SigmaToHSigmaUnknown {
    id: Identity,
    mship: BTreeSet<Identity>,
    quora: BTreeSet<(Label, IdMultiset)>,
    labels: BTreeSet<Label>,
}

impl SigmaToHSigmaUnknown {
    pub fn new(id: Identity) -> Self {
        Self {
            id,
            mship: BTreeSet::new(),
            quora: BTreeSet::new(),
            labels: BTreeSet::new(),
        }
    }
}

impl Layer for SigmaToHSigmaUnknown {
    fn name(&self) -> &'static str {
        "sigma_to_hsigma_unknown"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        cx.broadcast(Message::Ident(self.id.clone()));
        if let Some(pair) = trusted_quorum(cx) {
            self.quora.insert(pair);
        }
    }

    fn receive(&mut self, _cx: &mut Cx, msg: &Message) {
        if let Message::Ident(i) = msg {
            if self.mship.insert(i.clone()) {
                self.labels = labels_containing(&self.mship, &self.id);
            }
        }
    }

    fn output(&self) -> Option<Value> {
        Some(hsigma_value(&self.quora, &self.labels))
    }
}

fn rank(i: &Identity, alive: &[Identity]) -> usize {
    alive
        .iter()
        .position(|x| x == i)
        .map_or(usize::MAX, |p| p + 1)
}

/// Among `candidates`, the one whose worst-ranked member ranks best;
/// ties go to the smallest sorted identity sequence.
pub fn pick_candidate<'a>(
    candidates: impl IntoIterator<Item = &'a IdMultiset>,
    alive: &[Identity],
) -> Option<&'a IdMultiset> {
    candidates.into_iter().min_by(|a, b| {
        let ra = a.distinct().map(|i| rank(i, alive)).max().unwrap_or(0);
        let rb = b.distinct().map(|i| rank(i, alive)).max().unwrap_or(0);
        ra.cmp(&rb).then_with(|| {
            a.distinct()
                .collect::<Vec<_>>()
                .cmp(&b.distinct().collect::<Vec<_>>())
        })
    })
}

/// HΣ to Σ with the help of a Ξ detector (input 0: HΣ, input 1: Ξ).
#[derive(Debug, Clone)]
pub struct HSigmaToSigma {
    id: Identity,
    idents: BTreeMap<Label, BTreeSet<Identity>>,
    trusted: Option<BTreeSet<Identity>>,
}

impl HSigmaToSigma {
    pub fn new(id: Identity) -> Self {
        Self {
            id,
            idents: BTreeMap::new(),
            trusted: None,
        }
    }
}

impl Layer for HSigmaToSigma {
    fn name(&self) -> &'static str {
        "hsigma_to_sigma"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        let Some(FdOutput::HSigma { quora, labels }) = cx.input(0) else {
            return;
        };
        let (quora, labels) = (quora.clone(), labels.clone());
        cx.broadcast(Message::Labels {
            id: self.id.clone(),
            labels,
        });
        let candidates: Vec<&IdMultiset> = quora
            .iter()
            .filter(|(x, m)| {
                self.idents
                    .get(x)
                    .is_some_and(|known| m.iter().all(|(i, k)| k == 1 && known.contains(i)))
            })
            .map(|(_, m)| m)
            .collect();
        let alive = match cx.input(1) {
            Some(FdOutput::Xi { alive }) => alive.clone(),
            _ => Vec::new(),
        };
        if let Some(m) = pick_candidate(candidates, &alive) {
            self.trusted = Some(m.to_set());
        }
    }

    fn receive(&mut self, _cx: &mut Cx, msg: &Message) {
        if let Message::Labels { id, labels } = msg {
            for x in labels {
                self.idents.entry(x.clone()).or_default().insert(id.clone());
            }
        }
    }

    fn output(&self) -> Option<Value> {
        self.trusted
            .as_ref()
            .map(|t| Value::Fd(FdOutput::Sigma { trusted: t.clone() }))
    }
}

/// AΣ to HΣ in anonymous systems: `(x, y)` becomes `(x, ⊥^y)`.
#[derive(Debug, Clone, Default)]
pub struct ASigmaToHSigma {
    quora: BTreeSet<(Label, IdMultiset)>,
    labels: BTreeSet<Label>,
}

impl ASigmaToHSigma {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for ASigmaToHSigma {
    fn name(&self) -> &'static str {
        "asigma_to_hsigma"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        if let Some(FdOutput::ASigma { a_sigma }) = cx.input(0) {
            for (x, y) in a_sigma {
                self.labels.insert(x.clone());
                self.quora.retain(|(l, _)| l != x);
                self.quora
                    .insert((x.clone(), IdMultiset::repeated(Identity::Bot, *y)));
            }
        }
    }

    fn output(&self) -> Option<Value> {
        Some(hsigma_value(&self.quora, &self.labels))
    }
}

/// AP̄ to ◇HP̄ in anonymous systems: `anap` copies of ⊥.
#[derive(Debug, Clone, Default)]
pub struct ApToDhp {
    trusted: IdMultiset,
}

impl ApToDhp {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for ApToDhp {
    fn name(&self) -> &'static str {
        "ap_to_dhp"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        if let Some(FdOutput::ApBar { anap }) = cx.input(0) {
            let anap = *anap;
            if anap == 0 {
                cx.violation("anap=0 observed by a live process");
            }
            self.trusted = IdMultiset::repeated(Identity::Bot, anap);
        }
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Fd(FdOutput::Dhp {
            trusted: self.trusted.clone(),
        }))
    }
}

/// AP̄ to HΣ in anonymous systems: `(⊥^y, ⊥^y)` for every observed `y`.
#[derive(Debug, Clone, Default)]
pub struct ApToHSigma {
    quora: BTreeSet<(Label, IdMultiset)>,
    labels: BTreeSet<Label>,
}

impl ApToHSigma {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for ApToHSigma {
    fn name(&self) -> &'static str {
        "ap_to_hsigma"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        if let Some(FdOutput::ApBar { anap }) = cx.input(0) {
            let m = IdMultiset::repeated(Identity::Bot, *anap);
            self.labels.insert(Label::Set(m.clone()));
            self.quora.insert((Label::Set(m.clone()), m));
        }
    }

    fn output(&self) -> Option<Value> {
        Some(hsigma_value(&self.quora, &self.labels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(v: u64) -> Identity {
        Identity::Id(v)
    }

    fn set_label(ids: &[u64]) -> Label {
        Label::Set(ids.iter().map(|&i| id(i)).collect())
    }

    #[test]
    fn subsets_containing_own() {
        let ids: BTreeSet<Identity> = [id(1), id(2), id(3)].into();
        let got = labels_containing(&ids, &id(2));
        let want: BTreeSet<Label> = [
            set_label(&[2]),
            set_label(&[1, 2]),
            set_label(&[2, 3]),
            set_label(&[1, 2, 3]),
        ]
        .into();
        assert_eq!(got, want);
        assert_eq!(
            labels_containing(&[id(1)].into(), &id(1)),
            [set_label(&[1])].into()
        );
    }

    #[test]
    fn candidate_with_best_worst_rank() {
        let a: IdMultiset = "1^1+2^1".parse().unwrap();
        let b: IdMultiset = "3^1+4^1".parse().unwrap();
        let alive = vec![id(1), id(2), id(3), id(4)];
        assert_eq!(pick_candidate([&a, &b], &alive), Some(&a));
        assert_eq!(pick_candidate([&b], &alive), Some(&b));
        // Equal worst rank: smaller sorted identity sequence wins.
        let c: IdMultiset = "2^1+4^1".parse().unwrap();
        assert_eq!(pick_candidate([&b, &c], &alive), Some(&c));
    }

    #[test]
    fn asigma_pairs_replace_by_label() {
        let own = Identity::Bot;
        let mut l = ASigmaToHSigma::new();
        for y in [3usize, 2] {
            let inputs = [Some(FdOutput::ASigma {
                a_sigma: [(Label::Tag(7), y)].into(),
            })];
            let mut cx = Cx::new(&own, &inputs);
            l.tick(&mut cx);
        }
        assert_eq!(
            l.quora,
            [(Label::Tag(7), IdMultiset::repeated(Identity::Bot, 2))].into()
        );
        let inputs = [Some(FdOutput::ASigma {
            a_sigma: BTreeSet::new(),
        })];
        let before = l.quora.clone();
        l.tick(&mut Cx::new(&own, &inputs));
        assert_eq!(l.quora, before);
    }

    #[test]
    fn anap_maps_to_bottom_multisets() {
        let own = Identity::Bot;
        let mut d = ApToDhp::new();
        let mut h = ApToHSigma::new();
        for y in [4usize, 3] {
            let inputs = [Some(FdOutput::ApBar { anap: y })];
            d.tick(&mut Cx::new(&own, &inputs));
            h.tick(&mut Cx::new(&own, &inputs));
        }
        assert_eq!(d.trusted, "bot^3".parse().unwrap());
        assert_eq!(h.labels.len(), 2);
        let inputs = [Some(FdOutput::ApBar { anap: 0 })];
        let mut cx = Cx::new(&own, &inputs);
        d.tick(&mut cx);
        assert_eq!(cx.into_effects().violations.len(), 1);
    }
}
