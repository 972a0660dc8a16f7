use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gates::GateMatrix;
use crate::error::{ensure, Result};
use crate::sampling::multinomial;

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 26;

/// Pure state of `n` qubits stored as `2^n` amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        ensure!(
            (1..=MAX_QUBITS).contains(&n),
            "qubit count {n} outside 1..={MAX_QUBITS}"
        );
        let dim = 1usize << n;
        ensure!(index < dim, "basis index {index} out of range for {n} qubits");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes })
    }

    /// Wraps raw amplitudes, which must have length `2^n` and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        ensure!(
            dim >= 2 && dim.is_power_of_two(),
            "amplitude vector length {dim} is not a power of two >= 2"
        );
        let n = dim.trailing_zeros() as usize;
        ensure!(n <= MAX_QUBITS, "{n} qubits exceeds the cap of {MAX_QUBITS}");
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        ensure!(
            (norm - 1.0).abs() < 1e-10,
            "amplitudes are not normalized (norm^2 = {norm})"
        );
        Ok(Self { n, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn apply_single(&mut self, bit: usize, m: &[[Complex64; 2]; 2]) {
        let stride = 1usize << bit;
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let j = i + stride;
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[j];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += stride << 1;
        }
    }

    /// Applies a 4x4 block in the local basis `|b_hi b_lo⟩`, where `hi_bit`
    /// carries the more significant local bit.
    pub(crate) fn apply_pair(&mut self, hi_bit: usize, lo_bit: usize, m: &[[Complex64; 4]; 4]) {
        let hi = 1usize << hi_bit;
        let lo = 1usize << lo_bit;
        for i in 0..self.amplitudes.len() {
            if i & (hi | lo) != 0 {
                continue;
            }
            let idx = [i, i | lo, i | hi, i | hi | lo];
            let a = idx.map(|k| self.amplitudes[k]);
            for (row, &k) in idx.iter().enumerate() {
                self.amplitudes[k] = m[row][0] * a[0]
                    + m[row][1] * a[1]
                    + m[row][2] * a[2]
                    + m[row][3] * a[3];
            }
        }
    }

    /// Controlled-Z is diagonal; flip the sign where both bits are set.
    pub(crate) fn apply_cz(&mut self, bit_a: usize, bit_b: usize) {
        let mask = (1usize << bit_a) | (1usize << bit_b);
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    pub(crate) fn apply_matrix(&mut self, bits: &[usize], m: &GateMatrix) {
        match m {
            GateMatrix::One(m) => self.apply_single(bits[0], m),
            GateMatrix::Two(m) => self.apply_pair(bits[0], bits[1], m),
        }
    }
}

/// Domain-wall basis state: ones on qubits `0..n/2`, zeros elsewhere.
pub fn domain_wall_state(n: usize) -> Result<QuantumState> {
    ensure!(n >= 2 && n % 2 == 0, "domain wall needs an even qubit count >= 2, got {n}");
    let half = n / 2;
    // Qubit 0 is the most significant bit, so the left half is the high bits.
    let index = ((1usize << half) - 1) << (n - half);
    QuantumState::basis(n, index)
}

/// Outcome counts keyed by basis index. Only observed outcomes are stored.
pub type Histogram = BTreeMap<usize, u64>;

/// Draws `shots` computational-basis outcomes from `|amplitude|^2`.
pub fn sample<R: Rng + ?Sized>(state: &QuantumState, shots: u64, rng: &mut R) -> Result<Histogram> {
    ensure!(shots >= 1, "shot count must be at least 1");
    let counts = multinomial(&state.probabilities(), shots, rng);
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect())
}
