//! Gradient diagnostics for variational quantum objectives defined on
//! compressed measurement interfaces.
//!
//! The crate simulates teacher and student circuits, evaluates classical
//! loss heads on exposed feature distributions, and splits every parameter
//! gradient `∇L = J_F^⊤ g_F` into responsivity `σ_max(J_F)`, loss-side
//! signal `‖g_F‖` and transmittance. Finite-shot frontier protocols,
//! scaling-law classification and transmittance null models sit on top.

pub mod error;
pub mod experiment;
pub mod grad;
pub mod heads;
pub mod interface;
pub mod nullmodel;
pub mod qsim;
pub mod sampling;
pub mod scaling;
pub mod shots;

pub use error::{Error, Result};
