//! Dense statevector simulation.
//!
//! Bit-order convention: qubit 0 is the most significant bit of a basis
//! index, so the label `1100` on four qubits is index 12 and has qubits 0
//! and 1 excited.

mod circuit;
mod gates;
mod state;

pub use circuit::{
    build_student, build_teacher, teacher_depth, uniform_parameters, ParamCircuit, Role,
};
pub use gates::{Angle, Axis, Gate, GateMatrix};
pub use state::{domain_wall_state, sample, Histogram, QuantumState, MAX_QUBITS};

/// Bit position of `qubit` inside a basis index on `n` qubits.
#[inline]
pub(crate) fn bit_of(n: usize, qubit: usize) -> usize {
    n - 1 - qubit
}
