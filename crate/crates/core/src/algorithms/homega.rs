//! HΩ from ◇HP̄ without communication: smallest trusted identity and its count.

use crate::layer::{Cx, Layer};
use crate::model::Identity;
use crate::output::{FdOutput, Value};

#[derive(Debug, Clone)]
pub struct HOmegaAdapter {
    leader: Identity,
    multiplicity: usize,
}

impl Default for HOmegaAdapter {
    fn default() -> Self {
        Self {
            leader: Identity::Bot,
            multiplicity: 1,
        }
    }
}

impl HOmegaAdapter {
    pub fn new() -> Self {
        Self::default()
    }

    fn refresh(&mut self, cx: &mut Cx) {
        if let Some(FdOutput::Dhp { trusted }) = cx.input(0) {
            if let Some(min) = trusted.smallest() {
                self.multiplicity = trusted.multiplicity(min);
                self.leader = min.clone();
            }
        }
    }
}

impl Layer for HOmegaAdapter {
    fn name(&self) -> &'static str {
        "homega_adapter"
    }

    fn start(&mut self, cx: &mut Cx) {
        self.refresh(cx);
    }

    fn inputs_changed(&mut self, cx: &mut Cx) {
        self.refresh(cx);
    }

    fn output(&self) -> Option<Value> {
        Some(Value::Fd(FdOutput::HOmega {
            leader: self.leader.clone(),
            multiplicity: self.multiplicity,
        }))
    }
}
