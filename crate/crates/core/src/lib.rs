//! Truncated Fock-space simulation of a conditional-swap entangling protocol
//! for two harmonic oscillators coupled through a four-level coupler.
//!
//! The crate is organized in layers:
//!
//! - [`hilbert`]: tensor-product Hilbert-space algebra over truncated Fock
//!   spaces — sparse operators, kets, density matrices, matrix exponentials,
//!   partial traces, and the dense eigensolvers everything else leans on.
//! - [`states`]: factories for the oscillator and coupler states the protocol
//!   uses (Fock, coherent, squeezed vacuum, cat, superpositions).
//! - [`hamiltonians`]: the conditional beam-splitter Hamiltonian, the full
//!   driven four-level model, its adiabatic-elimination stages, the
//!   inter-resonator crosstalk term, the parameter-matching solver, and the
//!   large-detuning condition report.
//! - [`protocol`]: the ideal entangling protocol — conditional swap oracles,
//!   coupler pulse and post-selection, the tripartite extension, and a SWAP
//!   gate checker.
//! - [`lindblad`]: master-equation integrators (fixed-step RK4, adaptive
//!   embedded, and an interaction-picture method for oscillatory crosstalk)
//!   plus the dissipation channel set.
//! - [`metrics`]: fidelity, populations, purity, and entanglement entropy.

pub mod hamiltonians;
pub mod hilbert;
pub mod lindblad;
pub mod metrics;
pub mod protocol;
pub mod states;

use thiserror::Error;

/// Errors shared across the simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error(
        "truncation error: {context}: tail mass {tail:.3e} exceeds tolerance {tol:.3e}; \
         need at least {required} Fock states"
    )]
    Truncation {
        context: String,
        tail: f64,
        tol: f64,
        required: usize,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("phase condition violated: residual phase {residual:.3e} rad (tolerance {tol:.3e})")]
    PhaseCondition { residual: f64, tol: f64 },

    #[error("stiffness error: {0}")]
    Stiffness(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
