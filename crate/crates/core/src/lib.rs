//! Simulation and evaluation toolkit for multi-agent satellite inspection:
//! relative-motion dynamics, rigid-body rotation of the inspected object,
//! camera modelling, guidance strategies, Monte-Carlo strategy search,
//! validation campaigns and factorial statistics.

pub mod attitude;
pub mod config_io;
pub mod dynamics;
pub mod guidance;
pub mod llc;
pub mod mc_eval;
pub mod rng;
pub mod sensing;
pub mod stats;
pub mod validation;
