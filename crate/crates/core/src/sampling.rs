//! Multinomial draws and seed derivation shared by the shot-based code.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use sha2::{Digest, Sha256};

/// Counts of `shots` i.i.d. draws from the categorical distribution `probs`.
///
/// Small budgets draw each shot by inverse-CDF lookup; large budgets use
/// conditional binomials, which cost one draw per category regardless of
/// `shots`. The branch depends only on `(shots, probs.len())`.
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    if probs.is_empty() || shots == 0 {
        return counts;
    }
    if shots < (probs.len() as u64) / 4 {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            acc += p.max(0.0);
            cdf.push(acc);
        }
        let total = acc;
        for _ in 0..shots {
            let u = rng.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
            counts[k] += 1;
        }
        return counts;
    }
    let mut remaining = shots;
    let mut mass_left: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let last = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if k == last {
            counts[k] = remaining;
            break;
        }
        let cond = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond)
                .expect("probability clamped to (0,1)")
                .sample(rng)
        };
        counts[k] = draw;
        remaining -= draw;
        mass_left -= p;
    }
    counts
}

/// Derives a 32-byte RNG seed from a master seed and a labelled coordinate
/// path. Distinct paths give distinct seeds up to SHA-256 collisions.
pub fn derive_seed(master: u64, path: &[(&str, u64)]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"qgrad-seed-v1");
    hasher.update(master.to_le_bytes());
    for (label, value) in path {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
        hasher.update(value.to_le_bytes());
    }
    hasher.finalize().into()
}

/// First eight bytes of a derived seed, for APIs that take a `u64`.
pub fn derive_u64(master: u64, path: &[(&str, u64)]) -> u64 {
    let bytes = derive_seed(master, path);
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_sum_to_shots_on_both_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs = vec![1.0 / 64.0; 64];
        for shots in [1u64, 5, 15, 16, 1000, 1 << 20] {
            let c = multinomial(&probs, shots, &mut rng);
            assert_eq!(c.iter().sum::<u64>(), shots);
        }
    }

    #[test]
    fn zero_probability_categories_never_drawn() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let probs = [0.0, 0.5, 0.0, 0.5, 0.0];
        for shots in [1u64, 100_000] {
            let c = multinomial(&probs, shots, &mut rng);
            assert_eq!(c[0] + c[2] + c[4], 0);
        }
    }

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let a = derive_seed(1, &[("n", 8), ("c", 0)]);
        assert_ne!(a, derive_seed(2, &[("n", 8), ("c", 0)]));
        assert_ne!(a, derive_seed(1, &[("n", 8), ("c", 1)]));
        assert_ne!(a, derive_seed(1, &[("c", 8), ("n", 0)]));
        assert_eq!(a, derive_seed(1, &[("n", 8), ("c", 0)]));
    }
}
