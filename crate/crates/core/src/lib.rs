//! Optimal convex approximation of quantum states.
//!
//! Given a target density matrix `ρ` and a finite set of available states
//! `{ν_i}`, find the probabilities `p_i` minimizing `||ρ - sum_i p_i ν_i||_1`.
//! The crate provides the general numerical solver, a brute-force grid
//! oracle, closed-form qubit results over Pauli eigenstates together with an
//! audit of those formulas against the oracle, and multi-copy comparisons.

pub mod audit;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod multicopy;
pub mod qubit;
pub mod solver;
pub mod state_set;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, HermitianMatrix};
pub use solver::{ApproximationResult, SolverOptions};
pub use state_set::{StateSet, Weights};
