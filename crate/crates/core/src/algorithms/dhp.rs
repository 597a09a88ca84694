//! Polling-based ◇HP̄: rounds of POLLING/P_REPLY with an adaptive timeout.

use std::collections::BTreeMap;

use crate::layer::{Cx, Layer};
use crate::message::Message;
use crate::model::{IdMultiset, Identity};
use crate::output::{FdOutput, Value};

#[derive(Debug, Clone)]
pub struct Dhp {
    id: Identity,
    h_trusted: IdMultiset,
    r: u64,
    timeout: u64,
    latest_r: BTreeMap<Identity, u64>,
    /// Replies addressed to our identity, as `(lo, hi, sender)`.
    replies: Vec<(u64, u64, Identity)>,
}

impl Dhp {
    pub fn new(id: Identity) -> Self {
        Self {
            id,
            h_trusted: IdMultiset::new(),
            r: 1,
            timeout: 1,
            latest_r: BTreeMap::new(),
            replies: Vec::new(),
        }
    }

    pub fn round(&self) -> u64 {
        self.r
    }

    pub fn timeout(&self) -> u64 {
        self.timeout
    }

    fn poll(&mut self, cx: &mut Cx) {
        cx.broadcast(Message::Polling {
            r: self.r,
            id: self.id.clone(),
        });
        cx.set_timer(self.timeout, self.r);
    }
}

impl Layer for Dhp {
    fn name(&self) -> &'static str {
        "dhp"
    }

    fn start(&mut self, cx: &mut Cx) {
        self.poll(cx);
    }

    fn timer(&mut self, cx: &mut Cx, tag: u64) {
        if tag != self.r {
            return;
        }
        let r = self.r;
        self.h_trusted = self
            .replies
            .iter()
            .filter(|(lo, hi, _)| *lo <= r && r <= *hi)
            .map(|(_, _, q)| q.clone())
            .collect();
        self.r += 1;
        // A reply whose range ends before the current round can never match again.
        let r = self.r;
        self.replies.retain(|(_, hi, _)| *hi >= r);
        self.poll(cx);
    }

    fn receive(&mut self, cx: &mut Cx, msg: &Message) {
        match msg {
            Message::Polling { r: rq, id: q } => {
                let latest = self.latest_r.entry(q.clone()).or_insert(0);
                if *latest < *rq {
                    cx.broadcast(Message::PReply {
                        lo: *latest + 1,
                        hi: *rq,
                        dest: q.clone(),
                        sender: self.id.clone(),
                    });
                }
                *latest = (*latest).max(*rq);
            }
            Message::PReply {
                lo,
                hi,
                dest,
                sender,
            } if *dest == self.id => {
                if *hi >= self.r {
                    self.replies.push((*lo, *hi, sender.clone()));
                }
                if *lo < self.r {
                    self.timeout += 1;
                }
            }
            _ => {}
        }
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Fd(FdOutput::Dhp {
            trusted: self.h_trusted.clone(),
        }))
    }
}
