//! Numerical laboratory for deterministic and randomized Hamiltonian
//! simulation.
//!
//! The crate builds dense matrix realizations of Pauli-sum Hamiltonians and
//! compares product formulas, qDRIFT, SparSto (stochastic sparsification),
//! LCU block-encodings and QSVT-style polynomial evolution, together with
//! Clifford+T resource models for each method.

pub mod error;
pub mod linalg;
pub mod ensembles;
pub mod pauli;
pub mod seeding;
pub mod dynamics;
pub mod blockenc;
pub mod qsvt;
pub mod resources;
pub mod experiments;

pub use error::{Error, Result};
pub use pauli::{Hamiltonian, Pauli, PauliString, PauliTerm};
