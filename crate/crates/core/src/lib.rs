//! Algorithmic core for human-motion-driven planar quadruped control.
//!
//! Everything in this crate is deterministic and IO-free: dense networks with
//! manual backprop, a planar spring-damper quadruped simulator, procedural
//! source-motion clips, the cycle-consistency correspondence mappers, PPO, and
//! the evaluation metrics. File formats, logging, threading, and the CLI live
//! in the companion `crossloco` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod correspond;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod reward;
pub mod rl;
pub mod sim;
pub mod stats;
pub mod trainer;

/// Crate-wide rng; every random stream in the system is one of these,
/// seeded explicitly.
pub type Rng = rand_chacha::ChaCha8Rng;
