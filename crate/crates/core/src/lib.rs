//! Heterogeneous swarm simulator and evolution toolkit.
//!
//! A swarm of differential-drive robots is split into two sub-groups, each
//! running its own reservoir controller. CMA-ES evolves the output layers of
//! both controllers together so that the swarm, as a whole, climbs a light
//! gradient that no single robot can perceive. The harness reruns the
//! resulting controller across sub-group ratios, derives a light-driven
//! regulatory policy, and compares fixed and adaptive swarms.

pub mod cma;
pub mod controller;
pub mod error;
pub mod field;
pub mod harness;
pub mod metrics;
pub mod render;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
