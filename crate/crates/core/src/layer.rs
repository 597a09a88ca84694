//! The interface between automata and the kernel.

use crate::message::Message;
use crate::model::{Identity, Time};
use crate::output::{FdOutput, Value};

/// Per-handler context. Gives an automaton its own identity, the current
/// values of its detector inputs, and a way to broadcast, arm timers and
/// report contract violations. It deliberately exposes neither the process
/// key nor the clock.
pub struct Cx<'a> {
    own_id: &'a Identity,
    inputs: &'a [Option<FdOutput>],
    pub(crate) outbox: Vec<Message>,
    pub(crate) timers: Vec<(Time, u64)>,
    pub(crate) violations: Vec<String>,
}

impl<'a> Cx<'a> {
    pub fn new(own_id: &'a Identity, inputs: &'a [Option<FdOutput>]) -> Self {
        Self {
            own_id,
            inputs,
            outbox: Vec::new(),
            timers: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn own_id(&self) -> &Identity {
        self.own_id
    }

    /// Current value of input `i`, `None` while the provider has no output yet.
    pub fn input(&self, i: usize) -> Option<&FdOutput> {
        self.inputs.get(i).and_then(Option::as_ref)
    }

    pub fn broadcast(&mut self, m: Message) {
        self.outbox.push(m);
    }

    /// Fires `timer(tag)` after `delay` ticks (at least one).
    pub fn set_timer(&mut self, delay: Time, tag: u64) {
        self.timers.push((delay.max(1), tag));
    }

    pub fn violation(&mut self, detail: impl Into<String>) {
        self.violations.push(detail.into());
    }

    pub fn take_outbox(&mut self) -> Vec<Message> {
        std::mem::take(&mut self.outbox)
    }

    pub(crate) fn into_effects(self) -> Effects {
        Effects {
            outbox: self.outbox,
            timers: self.timers,
            violations: self.violations,
        }
    }
}

/// What a handler asked the kernel to do.
pub(crate) struct Effects {
    pub outbox: Vec<Message>,
    pub timers: Vec<(Time, u64)>,
    pub violations: Vec<String>,
}

/// A process-local automaton. A process runs a stack of layers; each layer
/// reads detector outputs from the oracles or from layers below it.
pub trait Layer: Send {
    /// Stream name under which the output is recorded.
    fn name(&self) -> &'static str;

    fn start(&mut self, _cx: &mut Cx) {}

    fn receive(&mut self, _cx: &mut Cx, _msg: &Message) {}

    fn timer(&mut self, _cx: &mut Cx, _tag: u64) {}

    /// One scheduler step ("repeat forever" bodies run once per tick).
    fn tick(&mut self, _cx: &mut Cx) {}

    /// Called whenever some input differs from the value last seen.
    fn inputs_changed(&mut self, _cx: &mut Cx) {}

    fn output(&self) -> Option<Value>;

    fn decision(&self) -> Option<u64> {
        None
    }

    fn uses_ticks(&self) -> bool {
        false
    }
}
