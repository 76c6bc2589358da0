//! Allocation-only kernels for swarm exploration experiments.
//!
//! Robots run turn-then-run random walks whose turning angles and straight
//! durations come either from a Levy-modulated correlated random walk or from
//! the node states of a non-homogeneous Boolean network. Everything here is
//! deterministic given its seeds and performs no IO; file formats, parallel
//! trial farms and the command line live in the companion `edgewalk` crate.
#![no_std]

extern crate alloc;

pub mod chaos;
pub mod controller;
pub mod error;
pub mod evolution;
pub mod network;
pub mod seed;
pub mod sim;
pub mod survival;

pub use error::{Error, Result};
pub use network::{BooleanNetwork, Gate, Link, MotionCommand, Topology};
