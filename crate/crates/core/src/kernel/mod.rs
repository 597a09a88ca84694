//! Deterministic discrete-event executor.
//!
//! Events are ordered by `(time, class, seq)`. At one instant deliveries run
//! first, then detector refreshes, timers, scheduler ticks, and finally the
//! crash record of any process crashing at that instant.

pub mod timing;
pub mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layer::{Cx, Effects, Layer};
use crate::message::Message;
use crate::model::{FailurePattern, Identity, ProcessKey, SystemSpec, Time};
use crate::oracles::Oracle;
use crate::output::{FdOutput, Value};

pub use timing::TimingModel;
pub use trace::{EventKind, History, Outcome, StepKind, Trace, TraceEvent};

/// Where a layer reads one of its detector inputs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Oracle(usize),
    Layer(usize),
}

pub struct LayerSlot {
    pub layer: Box<dyn Layer>,
    pub inputs: Vec<Source>,
}

impl LayerSlot {
    pub fn new(layer: impl Layer + 'static, inputs: Vec<Source>) -> Self {
        Self {
            layer: Box::new(layer),
            inputs,
        }
    }
}

/// Everything the kernel needs besides the automata themselves.
pub struct World {
    pub spec: SystemSpec,
    pub pattern: FailurePattern,
    pub timing: TimingModel,
    pub seed: u64,
    pub horizon: Time,
    pub oracles: Vec<Oracle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Deliver = 0,
    Refresh = 1,
    Timer = 2,
    Tick = 3,
    Crash = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Action {
    Start,
    Deliver { env: u64, from: ProcessKey },
    Refresh,
    Timer { layer: usize, tag: u64 },
    Tick,
    Crash,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: Time,
    class: Class,
    seq: u64,
}

struct Node {
    key: ProcessKey,
    id: Identity,
    slots: Vec<LayerSlot>,
    seen: Vec<Vec<Option<FdOutput>>>,
    published: Vec<Option<Value>>,
    decided: Vec<bool>,
}

struct Envelope {
    layer: usize,
    payload: Message,
}

struct Sim {
    world: World,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Reverse<(Key, usize)>>,
    actions: Vec<(ProcessKey, Action)>,
    seq: u64,
    envelopes: Vec<Envelope>,
    trace: Trace,
    ticking: Vec<bool>,
}

impl Sim {
    fn schedule(&mut self, time: Time, class: Class, proc: ProcessKey, action: Action) {
        let idx = self.actions.len();
        self.actions.push((proc, action));
        let key = Key {
            time,
            class,
            seq: self.seq,
        };
        self.seq += 1;
        self.queue.push(Reverse((key, idx)));
    }

    fn oracle_inputs(&self, slot: &LayerSlot, node: &Node, now: Time) -> Vec<Option<FdOutput>> {
        slot.inputs
            .iter()
            .map(|src| match *src {
                Source::Oracle(i) => Some(self.world.oracles[i].query(node.key, now)),
                Source::Layer(j) => node.slots[j]
                    .layer
                    .output()
                    .and_then(|v| v.as_fd().cloned()),
            })
            .collect()
    }

    fn inputs(&self, node: &Node, i: usize, now: Time) -> Vec<Option<FdOutput>> {
        self.oracle_inputs(&node.slots[i], node, now)
    }

    /// Records output and decision changes of layer `i` and ships its outbox.
    fn flush(&mut self, node: &mut Node, i: usize, fx: Effects, now: Time) {
        let Effects {
            outbox,
            timers,
            violations,
        } = fx;
        for detail in violations {
            self.trace.push(
                now,
                node.key,
                EventKind::Violation(format!("{} {detail}", node.slots[i].layer.name())),
            );
        }
        for m in outbox {
            self.broadcast(node.key, i, m, now);
        }
        for (delay, tag) in timers {
            let d = self.world.timing.timer_delay(now, delay, &mut self.rng);
            self.schedule(
                now + d,
                Class::Timer,
                node.key,
                Action::Timer { layer: i, tag },
            );
        }
        let out = node.slots[i].layer.output();
        if out != node.published[i] {
            if let Some(v) = &out {
                self.trace.push(
                    now,
                    node.key,
                    EventKind::OutputChange {
                        stream: node.slots[i].layer.name().to_string(),
                        value: v.clone(),
                    },
                );
            }
            node.published[i] = out;
        }
        if !node.decided[i] {
            if let Some(v) = node.slots[i].layer.decision() {
                node.decided[i] = true;
                self.trace.push(now, node.key, EventKind::Decide(v));
            }
        }
    }

    /// Notifies every layer whose inputs changed since it last looked.
    fn propagate(&mut self, node: &mut Node, now: Time) {
        for i in 0..node.slots.len() {
            let inputs = self.inputs(node, i, now);
            if inputs != node.seen[i] {
                node.seen[i] = inputs.clone();
                self.call(node, i, now, &inputs, |l, cx| l.inputs_changed(cx));
            }
        }
    }

    fn run_handler(
        &mut self,
        node: &mut Node,
        i: usize,
        now: Time,
        f: impl FnOnce(&mut dyn Layer, &mut Cx),
    ) {
        self.propagate(node, now);
        let inputs = self.inputs(node, i, now);
        node.seen[i] = inputs.clone();
        self.call(node, i, now, &inputs, f);
        self.propagate(node, now);
    }

    fn call(
        &mut self,
        node: &mut Node,
        i: usize,
        now: Time,
        inputs: &[Option<FdOutput>],
        f: impl FnOnce(&mut dyn Layer, &mut Cx),
    ) {
        let id = node.id.clone();
        let mut cx = Cx::new(&id, inputs);
        f(node.slots[i].layer.as_mut(), &mut cx);
        let fx = cx.into_effects();
        self.flush(node, i, fx, now);
    }

    fn broadcast(&mut self, sender: ProcessKey, layer: usize, payload: Message, now: Time) {
        let env = self.envelopes.len() as u64;
        let partial = self.world.pattern.crash_time(sender) == Some(now);
        let mut out = Vec::with_capacity(self.world.spec.n());
        for dest in self.world.spec.keys() {
            let included = !partial || self.rng.gen_bool(0.5);
            let at = if included {
                self.world
                    .timing
                    .assign_delay(now, self.world.horizon, &mut self.rng)
            } else {
                None
            };
            let outcome = match at {
                Some(t) if self.world.pattern.alive_at(dest, t) => Outcome::At(t),
                _ => Outcome::Lost,
            };
            if let Outcome::At(t) = outcome {
                self.schedule(
                    t,
                    Class::Deliver,
                    dest,
                    Action::Deliver { env, from: sender },
                );
            }
            out.push(outcome);
        }
        self.trace.push(
            now,
            sender,
            EventKind::Send {
                env,
                partial,
                out,
                payload: payload.clone(),
            },
        );
        self.envelopes.push(Envelope { layer, payload });
    }
}

/// Runs the automata built by `build` for every process until `world.horizon`.
pub fn simulate(
    world: World,
    mut build: impl FnMut(ProcessKey, &Identity) -> Vec<LayerSlot>,
) -> Trace {
    let rng = ChaCha8Rng::seed_from_u64(world.seed);
    let mut nodes: Vec<Node> = world
        .spec
        .keys()
        .map(|key| {
            let id = world.spec.id(key).clone();
            let slots = build(key, &id);
            let m = slots.len();
            Node {
                key,
                id,
                seen: slots.iter().map(|s| vec![None; s.inputs.len()]).collect(),
                slots,
                published: vec![None; m],
                decided: vec![false; m],
            }
        })
        .collect();
    let ticking = nodes
        .iter()
        .map(|n| n.slots.iter().any(|s| s.layer.uses_ticks()))
        .collect();
    let mut sim = Sim {
        world,
        rng,
        queue: BinaryHeap::new(),
        actions: Vec::new(),
        seq: 0,
        envelopes: Vec::new(),
        trace: Trace::new(),
        ticking,
    };
    let horizon = sim.world.horizon;
    for node in &nodes {
        sim.schedule(0, Class::Deliver, node.key, Action::Start);
        if let Some(c) = sim.world.pattern.crash_time(node.key) {
            sim.schedule(c, Class::Crash, node.key, Action::Crash);
        }
        let mut points: Vec<Time> = sim
            .world
            .oracles
            .iter()
            .flat_map(|o| o.change_points(node.key, horizon))
            .collect();
        points.sort_unstable();
        points.dedup();
        for t in points {
            sim.schedule(t, Class::Refresh, node.key, Action::Refresh);
        }
    }

    while let Some(Reverse((key, idx))) = sim.queue.pop() {
        let now = key.time;
        if now >= horizon {
            break;
        }
        let (proc, action) = sim.actions[idx].clone();
        if !sim.world.pattern.alive_at(proc, now) {
            continue;
        }
        let node = &mut nodes[proc.0];
        match action {
            Action::Start => {
                sim.trace.push(now, proc, EventKind::Step(StepKind::Start));
                record_oracles(&mut sim, node, now, true);
                for i in 0..node.slots.len() {
                    let inputs = sim.inputs(node, i, now);
                    node.seen[i] = inputs.clone();
                    sim.call(node, i, now, &inputs, |l, cx| l.start(cx));
                }
                sim.propagate(node, now);
                if sim.ticking[proc.0] {
                    let d = sim.world.timing.next_step(now, &mut sim.rng);
                    sim.schedule(now + d, Class::Tick, proc, Action::Tick);
                }
            }
            Action::Deliver { env, from } => {
                sim.trace.push(now, proc, EventKind::Deliver { env, from });
                let layer = sim.envelopes[env as usize].layer;
                let msg = sim.envelopes[env as usize].payload.clone();
                sim.run_handler(node, layer, now, |l, cx| l.receive(cx, &msg));
            }
            Action::Refresh => {
                record_oracles(&mut sim, node, now, false);
                sim.propagate(node, now);
            }
            Action::Timer { layer, tag } => {
                sim.trace.push(
                    now,
                    proc,
                    EventKind::Step(StepKind::Timer {
                        layer: node.slots[layer].layer.name().to_string(),
                        tag,
                    }),
                );
                sim.run_handler(node, layer, now, |l, cx| l.timer(cx, tag));
            }
            Action::Tick => {
                sim.trace.push(now, proc, EventKind::Step(StepKind::Tick));
                for i in 0..node.slots.len() {
                    if node.slots[i].layer.uses_ticks() {
                        sim.run_handler(node, i, now, |l, cx| l.tick(cx));
                    }
                }
                let d = sim.world.timing.next_step(now, &mut sim.rng);
                sim.schedule(now + d, Class::Tick, proc, Action::Tick);
            }
            Action::Crash => {
                sim.trace.push(now, proc, EventKind::Crash);
            }
        }
    }
    sim.trace
}

fn record_oracles(sim: &mut Sim, node: &Node, now: Time, initial: bool) {
    for o in &sim.world.oracles {
        let cur = o.query(node.key, now);
        if !initial && now > 0 && o.query(node.key, now - 1) == cur {
            continue;
        }
        sim.trace.push(
            now,
            node.key,
            EventKind::OutputChange {
                stream: format!("oracle.{}", o.class()),
                value: Value::Fd(cur),
            },
        );
    }
}
