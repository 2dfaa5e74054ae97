//! Stable sub-seed derivation and bounded noise streams.
//!
//! All randomness is drawn from per-purpose streams seeded by hashing a
//! canonical string, so generation order and thread count cannot change
//! output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a stable 64-bit seed from a base seed and a path of name parts.
pub fn stable_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for p in parts {
        hasher.update([0u8]);
        hasher.update(p.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Bounded multiplicative noise stream: factors in `[1 - a, 1 + a]`.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, amplitude: f64) -> Self {
        NoiseStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            amplitude,
        }
    }

    pub fn factor(&mut self) -> f64 {
        if self.amplitude == 0.0 {
            return 1.0;
        }
        1.0 + self.rng.gen_range(-1.0..=1.0) * self.amplitude
    }
}
