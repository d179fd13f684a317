//! Simulation of multiparameter Hamiltonian estimation with entangled probes.
//!
//! The crate evolves probes under linear Hamiltonian models `H_θ = Σ θ_j X_j`,
//! computes quantum Fisher information, runs the one-channel, adaptive and
//! many-channel estimation protocols end to end, and evaluates the metrological
//! bounds on the total time resource.

pub mod bounds;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod model;
pub mod probe;
pub mod qcore;
pub mod random;
pub mod symsub;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
