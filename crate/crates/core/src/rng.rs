//! Counter-seeded random streams.
//!
//! Every chain, minibatch and dataset draw gets its own stream keyed by
//! `(seed, domain, index)`, so results never depend on how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type ChainRng = ChaCha8Rng;

pub mod domain {
    pub const DATA: u64 = 1;
    pub const INIT: u64 = 2;
    pub const MINIBATCH: u64 = 3;
    pub const CHAIN: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const BENCH: u64 = 6;
    pub const TARGET: u64 = 7;
}

/// Deterministic stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChainRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Two-level stream, e.g. (iteration, chain).
pub fn substream(seed: u64, domain: u64, outer: u64, inner: u64) -> ChainRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&outer.to_le_bytes());
    key[24..].copy_from_slice(&inner.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn fill_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}
