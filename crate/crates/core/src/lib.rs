//! Simulation and statistical verification toolkit for nonuniformly
//! expanding dynamical systems.
//!
//! The pipeline runs from concrete maps ([`systems`]) through first-return
//! inducing ([`inducing`]) and the Gibbs–Markov machinery of the induced map
//! ([`gibbs_markov`]) to the discrete tower ([`tower`]) and continuous
//! suspensions ([`flow`]). [`variance`] and [`stats`] estimate and test the
//! limit laws, and [`lorentz`] simulates the periodic Lorentz gas.

pub mod error;
pub mod flow;
pub mod gibbs_markov;
pub mod inducing;
pub mod lorentz;
pub mod numeric;
pub mod rng;
pub mod stats;
pub mod systems;
pub mod tower;
pub mod variance;

pub use error::{Error, Result};
