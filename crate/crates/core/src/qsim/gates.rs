use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Angle source for a rotation: a trainable slot in θ or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Param(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// `exp(-i angle σ/2)` about a Pauli axis.
    Rotation { axis: Axis, qubit: usize, angle: Angle },
    /// Two-qubit gate that preserves Hamming weight: phases on `|00⟩` and
    /// `|11⟩`, a unitary mixing block on `span{|01⟩, |10⟩}`.
    NumberConserving { qubits: [usize; 2], angles: [f64; 4] },
    ControlledZ { qubits: [usize; 2] },
}

/// Dense matrix of a gate in its local basis.
#[derive(Debug, Clone, PartialEq)]
pub enum GateMatrix {
    One([[Complex64; 2]; 2]),
    Two([[Complex64; 4]; 4]),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rotation { qubit, .. } => vec![*qubit],
            Gate::NumberConserving { qubits, .. } | Gate::ControlledZ { qubits } => qubits.to_vec(),
        }
    }

    pub fn param_index(&self) -> Option<usize> {
        match self {
            Gate::Rotation {
                angle: Angle::Param(k),
                ..
            } => Some(*k),
            _ => None,
        }
    }

    /// Matrix at the given rotation angle (ignored for non-rotation gates).
    pub fn matrix(&self, rotation_angle: f64) -> GateMatrix {
        match self {
            Gate::Rotation { axis, .. } => GateMatrix::One(rotation_matrix(*axis, rotation_angle)),
            Gate::NumberConserving { angles, .. } => GateMatrix::Two(number_conserving_matrix(angles)),
            Gate::ControlledZ { .. } => {
                let mut m = [[ZERO; 4]; 4];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = if i == 3 { -ONE } else { ONE };
                }
                GateMatrix::Two(m)
            }
        }
    }
}

pub fn rotation_matrix(axis: Axis, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    match axis {
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [
            [Complex64::new(c, -s), ZERO],
            [ZERO, Complex64::new(c, s)],
        ],
    }
}

/// `angles = [phase_00, phase_11, mixing, relative_phase]`.
pub fn number_conserving_matrix(angles: &[f64; 4]) -> [[Complex64; 4]; 4] {
    let [phase00, phase11, mix, rel] = *angles;
    let (s, c) = mix.sin_cos();
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = Complex64::from_polar(1.0, phase00);
    m[1][1] = Complex64::from_polar(c, rel);
    m[1][2] = Complex64::new(-s, 0.0);
    m[2][1] = Complex64::new(s, 0.0);
    m[2][2] = Complex64::from_polar(c, -rel);
    m[3][3] = Complex64::from_polar(1.0, phase11);
    m
}

impl GateMatrix {
    /// Largest entry of `|G†G − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        fn defect<const D: usize>(m: &[[Complex64; D]; D]) -> f64 {
            let mut worst: f64 = 0.0;
            for i in 0..D {
                for j in 0..D {
                    let mut acc = ZERO;
                    for k in 0..D {
                        acc += m[k][i].conj() * m[k][j];
                    }
                    let target = if i == j { ONE } else { ZERO };
                    worst = worst.max((acc - target).norm());
                }
            }
            worst
        }
        match self {
            GateMatrix::One(m) => defect(m),
            GateMatrix::Two(m) => defect(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn every_gate_kind_is_unitary(t in 0.0..std::f64::consts::TAU, a in proptest::array::uniform4(0.0..std::f64::consts::TAU)) {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let g = Gate::Rotation { axis, qubit: 0, angle: Angle::Param(0) };
                prop_assert!(g.matrix(t).unitarity_defect() < 1e-12);
            }
            let nc = Gate::NumberConserving { qubits: [0, 1], angles: a };
            prop_assert!(nc.matrix(0.0).unitarity_defect() < 1e-12);
            let cz = Gate::ControlledZ { qubits: [0, 1] };
            prop_assert!(cz.matrix(0.0).unitarity_defect() < 1e-12);
        }

        #[test]
        fn number_conserving_block_keeps_weight_sectors(a in proptest::array::uniform4(0.0..std::f64::consts::TAU)) {
            let m = number_conserving_matrix(&a);
            let weight = |k: usize| (k as u32).count_ones();
            for (row, entries) in m.iter().enumerate() {
                for (col, v) in entries.iter().enumerate() {
                    if weight(row) != weight(col) {
                        prop_assert_eq!(v.norm(), 0.0);
                    }
                }
            }
        }
    }
}
