//! Tracking control for open quantum systems.
//!
//! The crate synthesizes control Hamiltonians that hold a scalar target
//! property f(ρ) constant under Lindblad noise, simulates the resulting
//! closed-loop dynamics with breakdown and stable-convergence detection,
//! classifies pointwise controllability, maps stable/breakdown landscapes
//! on the Bloch sphere, and provides the analytic breakdown-time formulas
//! the simulations are validated against.
//!
//! Modules follow the pipeline:
//!
//! - [`operator_space`]: basis construction and state representations
//! - [`channels`]: noise channels as Lindblad terms or (R, c) dissipators
//! - [`properties`]: target properties, gradients, controllability classes
//! - [`landscape`]: stable loci, breakdown sets, trajectory realizability
//! - [`control`]: f-preserving Hamiltonian synthesis
//! - [`dynamics`]: adaptive closed-loop integration with event detection
//! - [`breakdown`]: analytic breakdown times and reachability predicates

pub mod breakdown;
pub mod channels;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod interp;
pub mod landscape;
pub mod operator_space;
pub mod parallel;
pub mod properties;
pub mod sampling;

pub use error::{QppError, Result};
