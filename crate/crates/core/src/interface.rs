//! Measurement interfaces `F: states → ℝ^m`.
//!
//! Both shipped interfaces expose full probability distributions: the joint
//! distribution of block Hamming weights over contiguous qubit blocks, and
//! the full computational-basis distribution. Each feature `F_j` is the
//! probability of an outcome projector, so exact features are a pushforward
//! of `|amplitude|²`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::qsim::{QuantumState, MAX_QUBITS};
use crate::sampling::multinomial;

/// Contiguous partition of qubits `0..n` into `b` blocks. When `b ∤ n` the
/// first `n mod b` blocks carry one extra qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    n: usize,
    sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn canonical(n: usize, b: usize) -> Result<Self> {
        ensure!(b >= 1, "block count must be at least 1");
        ensure!(b <= n, "block count {b} exceeds qubit count {n}");
        let (base, extra) = (n / b, n % b);
        let sizes = (0..b).map(|j| base + usize::from(j < extra)).collect();
        Ok(Self { n, sizes })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Qubit ranges of each block.
    pub fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }

    /// `Π_j (|B_j| + 1)`.
    pub fn width(&self) -> usize {
        self.sizes.iter().map(|s| s + 1).product()
    }

    /// Basis-index bit masks of each block (qubit 0 is the top bit).
    fn masks(&self) -> Vec<usize> {
        self.blocks()
            .into_iter()
            .map(|r| r.map(|q| 1usize << (self.n - 1 - q)).sum())
            .collect()
    }

    pub fn weights_of_basis(&self, basis: usize) -> Vec<usize> {
        self.masks()
            .into_iter()
            .map(|m| (basis & m).count_ones() as usize)
            .collect()
    }

    /// Mixed-radix index of a weight tuple, `w_1` most significant.
    pub fn tuple_index(&self, weights: &[usize]) -> Result<usize> {
        ensure!(
            weights.len() == self.sizes.len(),
            "weight tuple has {} entries, partition has {} blocks",
            weights.len(),
            self.sizes.len()
        );
        let mut idx = 0;
        for (&w, &s) in weights.iter().zip(&self.sizes) {
            ensure!(w <= s, "block weight {w} exceeds block size {s}");
            idx = idx * (s + 1) + w;
        }
        Ok(idx)
    }

    pub fn tuple_of_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = index % (s + 1);
            index /= s + 1;
        }
        out
    }
}

/// `m(n, b)` for the canonical partition.
pub fn feature_width(n: usize, b: usize) -> Result<usize> {
    Ok(BlockPartition::canonical(n, b)?.width())
}

/// Popcount of each block of a bit label such as `"1011"` (qubit 0 first).
pub fn block_weights(bits: &str, partition: &BlockPartition) -> Result<Vec<usize>> {
    ensure!(
        bits.len() == partition.num_qubits(),
        "bit label has length {}, partition covers {} qubits",
        bits.len(),
        partition.num_qubits()
    );
    let bytes = bits.as_bytes();
    ensure!(
        bytes.iter().all(|b| *b == b'0' || *b == b'1'),
        "bit label {bits:?} contains characters other than 0/1"
    );
    Ok(partition
        .blocks()
        .into_iter()
        .map(|r| bytes[r].iter().filter(|&&b| b == b'1').count())
        .collect())
}

/// Generic exposed-statistics map onto a finite outcome alphabet.
pub trait FeatureMap {
    fn num_qubits(&self) -> usize;
    fn width(&self) -> usize;
    /// Feature slot that basis outcome `basis` contributes to.
    fn feature_index(&self, basis: usize) -> usize;
    fn descriptor(&self) -> InterfaceDescriptor;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interface {
    BlockWeights(BlockPartition),
    FullDistribution { n: usize },
}

impl Interface {
    pub fn block_weights(n: usize, b: usize) -> Result<Self> {
        Ok(Interface::BlockWeights(BlockPartition::canonical(n, b)?))
    }

    pub fn full_distribution(n: usize) -> Result<Self> {
        ensure!((1..=MAX_QUBITS).contains(&n), "qubit count {n} outside 1..={MAX_QUBITS}");
        Ok(Interface::FullDistribution { n })
    }
}

impl FeatureMap for Interface {
    fn num_qubits(&self) -> usize {
        match self {
            Interface::BlockWeights(p) => p.num_qubits(),
            Interface::FullDistribution { n } => *n,
        }
    }

    fn width(&self) -> usize {
        match self {
            Interface::BlockWeights(p) => p.width(),
            Interface::FullDistribution { n } => 1usize << n,
        }
    }

    fn feature_index(&self, basis: usize) -> usize {
        match self {
            Interface::BlockWeights(p) => {
                let mut idx = 0;
                for (m, &s) in p.masks().iter().zip(p.sizes()) {
                    idx = idx * (s + 1) + (basis & m).count_ones() as usize;
                }
                idx
            }
            Interface::FullDistribution { .. } => basis,
        }
    }

    fn descriptor(&self) -> InterfaceDescriptor {
        match self {
            Interface::BlockWeights(p) => InterfaceDescriptor {
                kind: "block-weights".into(),
                n: p.num_qubits(),
                b: p.num_blocks(),
                block_sizes: p.sizes().to_vec(),
                indexing: "mixed-radix, w1 most significant".into(),
            },
            Interface::FullDistribution { n } => InterfaceDescriptor {
                kind: "full-distribution".into(),
                n: *n,
                b: *n,
                block_sizes: vec![1; *n],
                indexing: "basis index, qubit 0 most significant".into(),
            },
        }
    }
}

/// Header written alongside every serialized feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceDescriptor {
    pub kind: String,
    pub n: usize,
    pub b: usize,
    pub block_sizes: Vec<usize>,
    pub indexing: String,
}

impl InterfaceDescriptor {
    pub fn id(&self) -> String {
        format!("{}:n={},b={}", self.kind, self.n, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub interface: InterfaceDescriptor,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_variation(&self, other: &FeatureVector) -> f64 {
        0.5 * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

fn pushforward(probs: &[f64], interface: &Interface) -> Vec<f64> {
    let mut out = vec![0.0; interface.width()];
    match interface {
        Interface::FullDistribution { .. } => out.copy_from_slice(probs),
        Interface::BlockWeights(p) => {
            let masks = p.masks();
            let radices: Vec<usize> = p.sizes().iter().map(|s| s + 1).collect();
            for (basis, &pr) in probs.iter().enumerate() {
                if pr == 0.0 {
                    continue;
                }
                let mut idx = 0;
                for (m, r) in masks.iter().zip(&radices) {
                    idx = idx * r + (basis & m).count_ones() as usize;
                }
                out[idx] += pr;
            }
        }
    }
    out
}

pub fn exact_features(state: &QuantumState, interface: &Interface) -> Result<FeatureVector> {
    ensure!(
        state.num_qubits() == interface.num_qubits(),
        "state has {} qubits, interface expects {}",
        state.num_qubits(),
        interface.num_qubits()
    );
    Ok(FeatureVector {
        interface: interface.descriptor(),
        values: pushforward(&state.probabilities(), interface),
    })
}

/// Empirical feature distribution from `shots` basis measurements.
///
/// The pushforward of a multinomial over basis outcomes is a multinomial
/// over feature slots with the exact feature probabilities, so the draw is
/// taken directly in feature space.
pub fn sampled_features<R: Rng + ?Sized>(
    state: &QuantumState,
    interface: &Interface,
    shots: u64,
    rng: &mut R,
) -> Result<FeatureVector> {
    let exact = exact_features(state, interface)?;
    resample(&exact, shots, rng)
}

/// Empirical distribution of `shots` draws from an exact feature vector.
pub fn resample<R: Rng + ?Sized>(
    exact: &FeatureVector,
    shots: u64,
    rng: &mut R,
) -> Result<FeatureVector> {
    ensure!(shots >= 1, "shot count must be at least 1");
    let counts = multinomial(&exact.values, shots, rng);
    let inv = 1.0 / shots as f64;
    Ok(FeatureVector {
        interface: exact.interface.clone(),
        values: counts.into_iter().map(|c| c as f64 * inv).collect(),
    })
}

/// Additive smoothing `(v + ε) / (1 + m·ε)`.
pub fn smooth(dist: &FeatureVector, eps: f64) -> Result<FeatureVector> {
    ensure!(eps > 0.0, "smoothing constant must be positive, got {eps}");
    Ok(FeatureVector {
        interface: dist.interface.clone(),
        values: smooth_values(&dist.values, eps),
    })
}

pub(crate) fn smooth_values(values: &[f64], eps: f64) -> Vec<f64> {
    let denom = 1.0 + values.len() as f64 * eps;
    values.iter().map(|v| (v + eps) / denom).collect()
}
