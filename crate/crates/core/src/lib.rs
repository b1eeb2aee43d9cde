//! Pauli noise learning by averaged circuit eigenvalue sampling (ACES) on a
//! simulated few-qubit device, with randomized-benchmarking cross-checks.
//!
//! The pipeline is: build random Clifford circuits from the native gate set
//! ([`circuits`]), turn each (circuit, input Pauli) pair into a design-matrix
//! row ([`aces`]), simulate the twirled prep/measure experiments with shot
//! noise and readout mitigation ([`simulator`]), then fit the per-gate Pauli
//! error rates ([`estimation`]). [`rb`] provides RB/IRB fidelities to compare
//! against.

pub mod aces;
pub mod channels;
pub mod circuits;
pub mod error;
pub mod estimation;
pub mod models;
pub mod pauli;
pub mod pipeline;
pub mod rb;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
