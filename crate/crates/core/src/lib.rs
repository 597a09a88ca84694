//! Simulation and verification of failure detectors and consensus in
//! homonymous crash-prone message-passing systems.

pub mod algorithms;
pub mod checker;
pub mod consensus;
pub mod kernel;
pub mod layer;
pub mod message;
pub mod model;
pub mod oracles;
pub mod output;
pub mod reductions;
pub mod scenario;
pub mod stack;
