//! Simulation core for a two-step protocol that prepares entangled Fock
//! states of two bosonic modes coupled dispersively to a three-level system.
//!
//! The crate is organised bottom-up: [`hilbert`] supplies truncated-Fock
//! operators and states, [`hamiltonian`] builds the lab-frame and
//! rotating-frame Hamiltonians of the lambda / delta / ladder coupling
//! topologies, [`dynamics`] integrates Schrodinger and Lindblad equations
//! with fixed-step RK4, [`protocol`] orchestrates the drive-then-measure
//! sequence, and [`analytics`] holds the closed-form planning tools
//! (fidelity estimates, collision scans, error budgets).

pub mod analytics;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod hilbert;
pub mod linalg;
pub mod protocol;

pub use error::CoreError;

/// Scalar type of every operator and state in the crate.
pub type C64 = num_complex::Complex64;

pub type Result<T> = std::result::Result<T, CoreError>;
