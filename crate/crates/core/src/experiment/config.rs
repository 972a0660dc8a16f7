use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure, Result};
use crate::heads::{hex_digest, HeadKind, DEFAULT_EPS};
use crate::nullmodel::{ShapeParams, SpectralShape};
use crate::qsim::{teacher_depth, MAX_QUBITS};
use crate::shots::{power_of_two_grid, ProbeKind, DEFAULT_KAPPA, DEFAULT_TAU};

/// One null-model menu entry: a spectral shape in dimension `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuEntry {
    pub m: usize,
    pub params: ShapeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub b: usize,
    /// Interface widths compared by the b-sweep.
    pub b_list: Vec<usize>,
    pub heads: Vec<HeadKind>,
    pub probe: ProbeKind,
    pub circuits: usize,
    pub reps: usize,
    /// Subspace size `s` for the multi probe.
    pub subspace: usize,
    pub shots_grid: Vec<u64>,
    pub kappa: f64,
    pub tau: f64,
    pub eps: f64,
    pub teacher_shots: u64,
    /// Student depth; `None` uses the teacher depth at each `n`.
    pub student_depth: Option<usize>,
    /// Multi probe: skip the finite-shot frontier and report exact
    /// decompositions only.
    pub exact_only: bool,
    pub null_menu: Vec<MenuEntry>,
    pub null_samples: usize,
    pub master_seed: u64,
    /// Where `runs/<run-id>/` is created. Not part of the checksum.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Full-scale protocol settings for the given probe.
    pub fn protocol_defaults(probe: ProbeKind) -> Self {
        let (circuits, reps) = match probe {
            ProbeKind::Single => (200, 30),
            ProbeKind::Multi => (60, 200),
        };
        Self {
            n_list: (8..=24).step_by(2).collect(),
            b: 4,
            b_list: vec![4, 6],
            heads: HeadKind::ALL.to_vec(),
            probe,
            circuits,
            reps,
            subspace: 32,
            shots_grid: power_of_two_grid(7, 20),
            kappa: DEFAULT_KAPPA,
            tau: DEFAULT_TAU,
            eps: DEFAULT_EPS,
            teacher_shots: 200_000,
            student_depth: None,
            exact_only: false,
            null_menu: default_null_menu(),
            null_samples: 100_000,
            master_seed: 1,
            out_dir: PathBuf::from("."),
        }
    }

    pub fn depth_for(&self, n: usize) -> usize {
        self.student_depth.unwrap_or_else(|| teacher_depth(n))
    }

    /// Number of student parameters at size `n`.
    pub fn num_params(&self, n: usize) -> usize {
        2 * n * self.depth_for(n)
    }

    /// Checks every invariant that can be decided before any simulation.
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.n_list.is_empty(), "n_list is empty");
        ensure!(
            self.n_list.windows(2).all(|w| w[0] < w[1]),
            "n_list must be strictly increasing: {:?}",
            self.n_list
        );
        for &n in &self.n_list {
            ensure!(
                n >= 4 && n % 2 == 0 && n <= MAX_QUBITS,
                "n = {n}: sizes must be even and within 4..={MAX_QUBITS}"
            );
        }
        let min_n = self.n_list[0];
        ensure!(self.b >= 1 && self.b <= min_n, "b = {} must lie in 1..={min_n}", self.b);
        ensure!(!self.heads.is_empty(), "no heads selected");
        let unique: BTreeSet<_> = self.heads.iter().collect();
        ensure!(unique.len() == self.heads.len(), "duplicate heads in {:?}", self.heads);
        ensure!(self.circuits >= 1, "need at least one circuit");
        ensure!(self.reps >= 2, "need at least 2 repetitions, got {}", self.reps);
        ensure!(self.student_depth != Some(0), "student depth must be positive");
        if self.probe == ProbeKind::Multi {
            ensure!(self.subspace >= 1, "subspace size must be positive");
            for &n in &self.n_list {
                let p = self.num_params(n);
                ensure!(self.subspace <= p, "subspace size {} exceeds P = {p} at n = {n}", self.subspace);
            }
        }
        ensure!(!self.shots_grid.is_empty(), "shot grid is empty");
        ensure!(self.shots_grid[0] >= 1, "shot budgets must be positive");
        ensure!(
            self.shots_grid.windows(2).all(|w| w[0] < w[1]),
            "shot grid must be strictly increasing"
        );
        ensure!(self.kappa.is_finite() && self.kappa > 0.0, "kappa must be positive, got {}", self.kappa);
        ensure!(self.tau.is_finite() && self.tau >= 0.0, "tau must be nonnegative, got {}", self.tau);
        ensure!(self.eps.is_finite() && self.eps >= 0.0, "eps must be nonnegative, got {}", self.eps);
        ensure!(self.teacher_shots >= 1, "teacher_shots must be positive");
        ensure!(self.null_samples >= 2, "null_samples must be at least 2");
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding (output directory excluded).
    pub fn checksum(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex_digest(&Sha256::digest(&bytes)))
    }

    /// `<pipeline>-<first 12 hex digits of the checksum>`.
    pub fn run_id(&self, pipeline: &str) -> Result<String> {
        Ok(format!("{pipeline}-{}", &self.checksum()?[..12]))
    }

    pub fn run_dir(&self, pipeline: &str) -> Result<PathBuf> {
        Ok(self.out_dir.join("runs").join(self.run_id(pipeline)?))
    }
}

/// Shapes covering every menu family.
pub fn default_null_menu() -> Vec<MenuEntry> {
    let block = |m, params| SpectralShape::build(m, params).expect("valid block");
    vec![
        MenuEntry { m: 256, params: ShapeParams::Isotropic },
        MenuEntry { m: 256, params: ShapeParams::WellConditioned { kappa: 2.0 } },
        MenuEntry { m: 256, params: ShapeParams::LowRank { rank: 8 } },
        MenuEntry { m: 10, params: ShapeParams::Spiked { spike: 3.0 } },
        MenuEntry { m: 1024, params: ShapeParams::PowerLaw { alpha: 0.75 } },
        MenuEntry { m: 256, params: ShapeParams::Exponential { rate: 1.0 } },
        MenuEntry {
            m: 128,
            params: ShapeParams::Block {
                blocks: vec![
                    block(64, ShapeParams::Isotropic),
                    block(64, ShapeParams::LowRank { rank: 16 }),
                ],
            },
        },
    ]
}
