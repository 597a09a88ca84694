//! Ξ: identities ordered by most recent ALIVE receipt.

use crate::layer::{Cx, Layer};
use crate::message::Message;
use crate::model::Identity;
use crate::output::{FdOutput, Value};

#[derive(Debug, Clone)]
pub struct Xi {
    id: Identity,
    alive: Vec<Identity>,
}

impl Xi {
    pub fn new(id: Identity) -> Self {
        Self {
            id,
            alive: Vec::new(),
        }
    }
}

impl Layer for Xi {
    fn name(&self) -> &'static str {
        "xi"
    }

    fn uses_ticks(&self) -> bool {
        true
    }

    fn tick(&mut self, cx: &mut Cx) {
        cx.broadcast(Message::Alive(self.id.clone()));
    }

    fn receive(&mut self, _cx: &mut Cx, msg: &Message) {
        if let Message::Alive(i) = msg {
            self.alive.retain(|x| x != i);
            self.alive.insert(0, i.clone());
        }
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Fd(FdOutput::Xi {
            alive: self.alive.clone(),
        }))
    }
}
