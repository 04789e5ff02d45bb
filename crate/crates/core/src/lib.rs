//! Rectified wire networks and their monotone, conservative training.
//!
//! A rectified wire network is a layered DAG whose edges each apply
//! `max(0, x - b)` with their own non-negative bias `b`, and whose nodes sum
//! their incoming edge outputs times a static positive weight. Biases are
//! the only learned parameters. Training drives the output node of the
//! correct class to zero (or to the strict minimum) with a minimal,
//! monotone bias increase computed by sequential deactivation.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the QP oracle and
//! the command line live in the companion `rwnet` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod builders;
pub mod dynamics;
pub mod encode;
mod error;
pub mod netgraph;
pub mod rng;
pub mod sda;
pub mod synthdata;
pub mod trainer;

pub use dynamics::{classify, eval, grad, velocity, ActivationState, Classification, GradField, VelocityField};
pub use error::{Error, Result};
pub use netgraph::{BiasVector, Edge, EdgeId, Network, NodeId};
pub use rng::SeededRng;
pub use sda::{sda_update, SdaOutcome, Terminal, TerminationMode};
pub use encode::Sample;
