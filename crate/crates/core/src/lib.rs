//! Preconditioned proximal-point solvers with per-iteration convergence
//! certificates.
//!
//! The crate is organized around one abstraction: every solver is a supplier
//! of per-iteration step plans `(M, W, Z, V', Δ)` for the inclusion
//! `0 ∈ W H(u⁺) + V'(u⁺) + M(u⁺ - uⁱ)`, and the engine both drives the
//! iteration and verifies the inclusion numerically from prox-optimality
//! selections. Certificates then evaluate the iteration-wise inequalities
//! (quantitative Féjer monotonicity, fundamental conditions, descent and
//! ergodic-gap inequalities) along the recorded trajectory, and the rates
//! module fits empirical convergence orders.

pub mod certificates;
pub mod engine;
pub mod error;
pub mod linops;
pub mod problems;
pub mod rates;
pub mod rng;
pub mod solvers;
pub mod stochastic;

pub use error::{Error, Result};
pub use linops::{BlockLayout, BlockVec, LinearMap, MapTag};
