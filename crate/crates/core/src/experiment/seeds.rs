//! Every random stream in a run is keyed by its coordinates in the
//! experiment grid, so results do not depend on scheduling or on which
//! cells were computed in an earlier, interrupted run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::heads::HeadKind;
use crate::sampling::{derive_seed, derive_u64};
use crate::shots::ProbeKind;

fn head_code(head: HeadKind) -> u64 {
    match head {
        HeadKind::Linear => 0,
        HeadKind::Jsd => 1,
        HeadKind::Nll => 2,
    }
}

fn probe_code(probe: ProbeKind) -> u64 {
    match probe {
        ProbeKind::Single => 0,
        ProbeKind::Multi => 1,
    }
}

/// Coordinates of one student circuit in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CircuitKey {
    pub probe: ProbeKind,
    pub b: usize,
    pub n: usize,
    pub head: HeadKind,
    pub circuit: usize,
}

impl CircuitKey {
    fn path(&self) -> [(&'static str, u64); 5] {
        [
            ("probe", probe_code(self.probe)),
            ("b", self.b as u64),
            ("n", self.n as u64),
            ("head", head_code(self.head)),
            ("circuit", self.circuit as u64),
        ]
    }

    /// Seed for θ, the probed coordinate and the subspace sketch.
    pub fn seed(&self, master: u64) -> [u8; 32] {
        derive_seed(master, &self.path())
    }

    pub fn rng(&self, master: u64) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed(master))
    }

    /// Seed for one finite-shot repetition at budget `shots`.
    pub fn shot_seed(&self, master: u64, repetition: usize, shots: u64) -> [u8; 32] {
        let [a, b, c, d, e] = self.path();
        derive_seed(master, &[a, b, c, d, e, ("rep", repetition as u64), ("shots", shots)])
    }

    pub fn shot_rng(&self, master: u64, repetition: usize, shots: u64) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.shot_seed(master, repetition, shots))
    }
}

/// Seed of the teacher circuit at size `n`; shared by every head and probe.
pub fn teacher_circuit_seed(master: u64, n: usize) -> u64 {
    derive_u64(master, &[("teacher", n as u64)])
}

/// Stream for the teacher's finite-shot target estimate.
pub fn teacher_sample_rng(master: u64, n: usize, b: usize) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, &[("teacher-shots", n as u64), ("b", b as u64)]))
}

/// Stream for one null-model menu entry.
pub fn null_menu_rng(master: u64, entry: usize) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, &[("null-menu", entry as u64)]))
}
