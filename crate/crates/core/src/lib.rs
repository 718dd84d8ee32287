//! Virtual cooling on small lattice systems: measuring observables of
//! `ρⁿ/tr ρⁿ` from `n` copies of `ρ`, with exact density-matrix oracles for
//! every estimator.
//!
//! [`fock`] and [`model`] build occupation bases and Hamiltonians,
//! [`thermal`] the states, [`replica`] the inter-copy transform and phase
//! operators, and [`protocol`] the estimators built on them.

pub mod correlator;
pub mod experiment;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod protocol;
pub mod quench;
pub mod replica;
pub mod scalar;
pub mod thermal;
pub mod verify;
