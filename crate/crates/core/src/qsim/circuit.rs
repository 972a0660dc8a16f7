use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gates::{Angle, Axis, Gate};
use super::state::{QuantumState, MAX_QUBITS};
use super::bit_of;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Teacher,
    Student,
}

/// Ordered gate list over a parameter vector of length `num_params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCircuit {
    n: usize,
    gates: Vec<Gate>,
    num_params: usize,
    role: Role,
}

impl ParamCircuit {
    pub fn new(n: usize, gates: Vec<Gate>, num_params: usize, role: Role) -> Result<Self> {
        ensure!((1..=MAX_QUBITS).contains(&n), "qubit count {n} outside 1..={MAX_QUBITS}");
        let mut seen = vec![false; num_params];
        for (i, gate) in gates.iter().enumerate() {
            let qubits = gate.qubits();
            ensure!(
                qubits.iter().all(|&q| q < n),
                "gate {i} targets a qubit outside 0..{n}"
            );
            if qubits.len() == 2 {
                ensure!(qubits[0] != qubits[1], "gate {i} repeats target qubit {}", qubits[0]);
            }
            if let Some(k) = gate.param_index() {
                ensure!(k < num_params, "gate {i} references parameter {k} >= {num_params}");
                seen[k] = true;
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(crate::error::invalid!("parameter {k} is not used by any gate"));
        }
        Ok(Self {
            n,
            gates,
            num_params,
            role,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Gate positions whose angle is parameter `k`.
    pub fn occurrences(&self, k: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.param_index() == Some(k))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn run(&self, input: &QuantumState, theta: &[f64]) -> Result<QuantumState> {
        self.run_with_offset(input, theta, None)
    }

    /// Runs the circuit with `offset.1` added to the angle of the single gate
    /// at position `offset.0`. Shift-rule evaluations go through here so that
    /// parameters shared by several gates are shifted one occurrence at a time.
    pub fn run_with_offset(
        &self,
        input: &QuantumState,
        theta: &[f64],
        offset: Option<(usize, f64)>,
    ) -> Result<QuantumState> {
        ensure!(
            theta.len() == self.num_params,
            "parameter vector has length {}, circuit expects {}",
            theta.len(),
            self.num_params
        );
        ensure!(
            input.num_qubits() == self.n,
            "input state has {} qubits, circuit has {}",
            input.num_qubits(),
            self.n
        );
        let mut state = input.clone();
        for (i, gate) in self.gates.iter().enumerate() {
            let extra = match offset {
                Some((pos, delta)) if pos == i => delta,
                _ => 0.0,
            };
            match gate {
                Gate::Rotation { qubit, angle, .. } => {
                    let value = match angle {
                        Angle::Param(k) => theta[*k],
                        Angle::Fixed(v) => *v,
                    } + extra;
                    state.apply_matrix(&[bit_of(self.n, *qubit)], &gate.matrix(value));
                }
                Gate::NumberConserving { qubits, .. } => {
                    let bits = [bit_of(self.n, qubits[0]), bit_of(self.n, qubits[1])];
                    state.apply_matrix(&bits, &gate.matrix(0.0));
                }
                Gate::ControlledZ { qubits } => {
                    state.apply_cz(bit_of(self.n, qubits[0]), bit_of(self.n, qubits[1]));
                }
            }
        }
        Ok(state)
    }
}

/// Teacher depth `⌈(n/4)²⌉`.
pub fn teacher_depth(n: usize) -> usize {
    (n * n).div_ceil(16)
}

/// Brickwork of number-conserving gates on alternating even/odd bonds,
/// `teacher_depth(n)` layers, fresh random angles per gate.
pub fn build_teacher(n: usize, seed: u64) -> Result<ParamCircuit> {
    ensure!(n >= 4 && n % 2 == 0, "teacher needs an even qubit count >= 4, got {n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates = Vec::new();
    for layer in 0..teacher_depth(n) {
        for left in (layer % 2..n - 1).step_by(2) {
            let angles = [
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
                rng.random_range(0.0..TAU),
            ];
            gates.push(Gate::NumberConserving {
                qubits: [left, left + 1],
                angles,
            });
        }
    }
    ParamCircuit::new(n, gates, 0, Role::Teacher)
}

/// Hardware-efficient student: per layer an RY and an RZ on every qubit,
/// each its own parameter, then a CZ ladder on open-boundary bonds.
/// `P = 2·n·depth`.
pub fn build_student(n: usize, depth: usize) -> Result<ParamCircuit> {
    ensure!(n >= 2, "student needs at least 2 qubits, got {n}");
    ensure!(depth >= 1, "student depth must be at least 1");
    let mut gates = Vec::with_capacity(depth * (3 * n - 1));
    let mut next = 0;
    for _ in 0..depth {
        for qubit in 0..n {
            for axis in [Axis::Y, Axis::Z] {
                gates.push(Gate::Rotation {
                    axis,
                    qubit,
                    angle: Angle::Param(next),
                });
                next += 1;
            }
        }
        for left in 0..n - 1 {
            gates.push(Gate::ControlledZ {
                qubits: [left, left + 1],
            });
        }
    }
    ParamCircuit::new(n, gates, next, Role::Student)
}

/// θ drawn uniformly from `[0, 2π)^len`.
pub fn uniform_parameters<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.0..TAU)).collect()
}
