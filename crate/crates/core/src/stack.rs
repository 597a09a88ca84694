//! Algorithm stacks: which automata run at every process and where each of
//! them reads its detector inputs.

use std::fmt;
use std::str::FromStr;

use crate::algorithms::{Dhp, HOmegaAdapter, HSigmaSync, Xi};
use crate::consensus::{Consensus, ConsensusKind, Variant};
use crate::kernel::{LayerSlot, Source};
use crate::model::{Identity, SystemSpec};
use crate::output::FdClass;
use crate::reductions::{
    ASigmaToHSigma, ApToDhp, ApToHSigma, HSigmaToSigma, SigmaToHSigmaKnown, SigmaToHSigmaUnknown,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Component {
    Dhp,
    HOmegaAdapter,
    HSigmaSync,
    Xi,
    SigmaToHSigmaKnown,
    SigmaToHSigmaUnknown,
    HSigmaToSigma,
    ASigmaToHSigma,
    ApToDhp,
    ApToHSigma,
}

impl Component {
    pub const ALL: [Component; 10] = [
        Component::Dhp,
        Component::HOmegaAdapter,
        Component::HSigmaSync,
        Component::Xi,
        Component::SigmaToHSigmaKnown,
        Component::SigmaToHSigmaUnknown,
        Component::HSigmaToSigma,
        Component::ASigmaToHSigma,
        Component::ApToDhp,
        Component::ApToHSigma,
    ];

    /// Canonical name, also the name of the output stream in traces.
    pub fn name(self) -> &'static str {
        match self {
            Component::Dhp => "dhp",
            Component::HOmegaAdapter => "homega_adapter",
            Component::HSigmaSync => "hsigma_sync",
            Component::Xi => "xi",
            Component::SigmaToHSigmaKnown => "sigma_to_hsigma_known",
            Component::SigmaToHSigmaUnknown => "sigma_to_hsigma_unknown",
            Component::HSigmaToSigma => "hsigma_to_sigma",
            Component::ASigmaToHSigma => "asigma_to_hsigma",
            Component::ApToDhp => "ap_to_dhp",
            Component::ApToHSigma => "ap_to_hsigma",
        }
    }

    fn alias(self) -> Option<&'static str> {
        match self {
            Component::Dhp => Some("fig1"),
            Component::HSigmaSync => Some("fig2"),
            Component::SigmaToHSigmaKnown => Some("fig5"),
            Component::SigmaToHSigmaUnknown => Some("fig6"),
            Component::Xi => Some("fig7"),
            Component::HSigmaToSigma => Some("fig8"),
            _ => None,
        }
    }

    pub fn output_class(self) -> FdClass {
        match self {
            Component::Dhp | Component::ApToDhp => FdClass::Dhp,
            Component::HOmegaAdapter => FdClass::HOmega,
            Component::Xi => FdClass::Xi,
            Component::HSigmaToSigma => FdClass::Sigma,
            Component::HSigmaSync
            | Component::SigmaToHSigmaKnown
            | Component::SigmaToHSigmaUnknown
            | Component::ASigmaToHSigma
            | Component::ApToHSigma => FdClass::HSigma,
        }
    }

    pub fn input_classes(self) -> &'static [FdClass] {
        match self {
            Component::Dhp | Component::HSigmaSync | Component::Xi => &[],
            Component::HOmegaAdapter => &[FdClass::Dhp],
            Component::SigmaToHSigmaKnown | Component::SigmaToHSigmaUnknown => &[FdClass::Sigma],
            Component::HSigmaToSigma => &[FdClass::HSigma, FdClass::Xi],
            Component::ASigmaToHSigma => &[FdClass::ASigma],
            Component::ApToDhp | Component::ApToHSigma => &[FdClass::ApBar],
        }
    }

    /// Whether the component sends messages at all.
    pub fn communicates(self) -> bool {
        matches!(
            self,
            Component::Dhp
                | Component::HSigmaSync
                | Component::Xi
                | Component::SigmaToHSigmaUnknown
                | Component::HSigmaToSigma
        )
    }

    fn build(self, id: &Identity, spec: &SystemSpec) -> Box<dyn crate::layer::Layer> {
        match self {
            Component::Dhp => Box::new(Dhp::new(id.clone())),
            Component::HOmegaAdapter => Box::new(HOmegaAdapter::new()),
            Component::HSigmaSync => Box::new(HSigmaSync::new(id.clone())),
            Component::Xi => Box::new(Xi::new(id.clone())),
            Component::SigmaToHSigmaKnown => {
                Box::new(SigmaToHSigmaKnown::new(id, &spec.membership()))
            }
            Component::SigmaToHSigmaUnknown => Box::new(SigmaToHSigmaUnknown::new(id.clone())),
            Component::HSigmaToSigma => Box::new(HSigmaToSigma::new(id.clone())),
            Component::ASigmaToHSigma => Box::new(ASigmaToHSigma::new()),
            Component::ApToDhp => Box::new(ApToDhp::new()),
            Component::ApToHSigma => Box::new(ApToHSigma::new()),
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Component::ALL
            .into_iter()
            .find(|c| c.name() == s || c.alias() == Some(s))
            .ok_or_else(|| format!("unknown stack component `{s}`"))
    }
}

pub fn consensus_inputs(kind: ConsensusKind) -> &'static [FdClass] {
    match kind {
        ConsensusKind::Majority => &[FdClass::HOmega],
        ConsensusKind::Quorum => &[FdClass::HOmega, FdClass::HSigma],
        ConsensusKind::AnonymousQuorum => &[FdClass::AOmega, FdClass::HSigma],
    }
}

/// One layer of a resolved stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wiring {
    pub component: Option<Component>,
    pub inputs: Vec<Source>,
}

/// Layers in execution order, plus the consensus layer (last) if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub layers: Vec<Wiring>,
    pub consensus: Option<ConsensusKind>,
    pub oracle_classes: Vec<FdClass>,
}

fn provider(
    class: FdClass,
    layers: &[Wiring],
    oracles: &[FdClass],
    who: &str,
) -> Result<Source, String> {
    let from_layers: Vec<usize> = layers
        .iter()
        .enumerate()
        .filter(|(_, w)| w.component.map(Component::output_class) == Some(class))
        .map(|(i, _)| i)
        .collect();
    match from_layers.as_slice() {
        [i] => return Ok(Source::Layer(*i)),
        [] => {}
        _ => return Err(format!("{who}: more than one stage provides {class}")),
    }
    match oracles.iter().position(|c| *c == class) {
        Some(i) => Ok(Source::Oracle(i)),
        None => Err(format!(
            "{who}: no oracle or earlier stage provides {class}"
        )),
    }
}

/// Resolves pipelines into a wiring. Within a pipeline each stage reads its
/// first input from the stage before it; every other input is looked up by
/// class among earlier stages, then among oracles.
pub fn plan(
    oracles: &[FdClass],
    pipelines: &[Vec<Component>],
    consensus: Option<ConsensusKind>,
) -> Result<Plan, String> {
    let mut layers: Vec<Wiring> = Vec::new();
    for pipe in pipelines {
        for (k, &c) in pipe.iter().enumerate() {
            if layers.iter().any(|w| w.component == Some(c)) {
                return Err(format!("component `{c}` appears twice"));
            }
            let mut inputs = Vec::new();
            for (j, &class) in c.input_classes().iter().enumerate() {
                if k > 0 && j == 0 {
                    let prev = pipe[k - 1];
                    if prev.output_class() != class {
                        return Err(format!(
                            "`{c}` expects {class} but `{prev}` provides {}",
                            prev.output_class()
                        ));
                    }
                    inputs.push(Source::Layer(layers.len() - 1));
                } else {
                    inputs.push(provider(class, &layers, oracles, c.name())?);
                }
            }
            layers.push(Wiring {
                component: Some(c),
                inputs,
            });
        }
    }
    if let Some(kind) = consensus {
        let inputs = consensus_inputs(kind)
            .iter()
            .map(|&class| provider(class, &layers, oracles, kind.name()))
            .collect::<Result<Vec<_>, _>>()?;
        layers.push(Wiring {
            component: None,
            inputs,
        });
    }
    Ok(Plan {
        layers,
        consensus,
        oracle_classes: oracles.to_vec(),
    })
}

impl Plan {
    /// Builds the layers of one process.
    pub fn instantiate(
        &self,
        id: &Identity,
        spec: &SystemSpec,
        proposal: Option<u64>,
        t: usize,
    ) -> Vec<LayerSlot> {
        self.layers
            .iter()
            .map(|w| {
                let layer: Box<dyn crate::layer::Layer> = match w.component {
                    Some(c) => c.build(id, spec),
                    None => {
                        let variant = match self.consensus.expect("consensus layer") {
                            ConsensusKind::Majority => Variant::Majority { n: spec.n(), t },
                            ConsensusKind::Quorum => Variant::Quorum,
                            ConsensusKind::AnonymousQuorum => Variant::QuorumAnonymous,
                        };
                        Box::new(
                            Consensus::new(variant, id.clone(), proposal.unwrap_or(0))
                                .expect("validated scenario"),
                        )
                    }
                };
                LayerSlot {
                    layer,
                    inputs: w.inputs.clone(),
                }
            })
            .collect()
    }

    /// Output stream names with the class each carries.
    pub fn streams(&self) -> Vec<(String, FdClass)> {
        let mut v: Vec<(String, FdClass)> = self
            .oracle_classes
            .iter()
            .map(|c| (format!("oracle.{c}"), *c))
            .collect();
        for w in &self.layers {
            if let Some(c) = w.component {
                v.push((c.name().to_string(), c.output_class()));
            }
        }
        v
    }
}
