//! HΣ in synchronous systems: every round, the multiset of identities heard
//! in that round becomes both a label and a quorum.

use std::collections::BTreeSet;

use crate::layer::{Cx, Layer};
use crate::message::Message;
use crate::model::{IdMultiset, Identity};
use crate::output::{FdOutput, Label, Value};

#[derive(Debug, Clone)]
pub struct HSigmaSync {
    id: Identity,
    quora: BTreeSet<(Label, IdMultiset)>,
    labels: BTreeSet<Label>,
    mset: IdMultiset,
    rounds: u64,
}

impl HSigmaSync {
    pub fn new(id: Identity) -> Self {
        Self {
            id,
            quora: BTreeSet::new(),
            labels: BTreeSet::new(),
            mset: IdMultiset::new(),
            rounds: 0,
        }
    }
}

impl Layer for HSigmaSync {
    fn name(&self) -> &'static str {
        "hsigma_sync"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        if self.rounds > 0 {
            let mset = std::mem::take(&mut self.mset);
            self.quora.insert((Label::Set(mset.clone()), mset.clone()));
            self.labels.insert(Label::Set(mset));
        }
        self.rounds += 1;
        cx.broadcast(Message::Ident(self.id.clone()));
    }

    fn receive(&mut self, _cx: &mut Cx, msg: &Message) {
        if let Message::Ident(i) = msg {
            self.mset.insert(i.clone());
        }
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Fd(FdOutput::HSigma {
            quora: self.quora.clone(),
            labels: self.labels.clone(),
        }))
    }
}
