//! Seeded randomness helpers.
//!
//! Every seeded operation in the pipeline draws from ChaCha12 keyed by the
//! caller's 64-bit seed, with the stream index separating independent uses of
//! the same seed. Shuffling is Fisher-Yates with Lemire bounded sampling, so
//! a (seed, stream) pair replays to the same permutation on every platform.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Algorithm label recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha12/fisher-yates-lemire";

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// FNV-1a. Used to derive per-document sub-seeds; stable across platforms
/// and releases, unlike the std hasher.
pub fn stable_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Uniform draw from `0..bound` via widening multiply with rejection.
pub fn bounded(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "bounded sampling requires a nonzero bound");
    loop {
        let x = rng.next_u64();
        let m = (x as u128) * (bound as u128);
        let low = m as u64;
        if low >= bound {
            return (m >> 64) as u64;
        }
        // Rejection zone: accept only when low clears the bias threshold.
        let threshold = bound.wrapping_neg() % bound;
        if low >= threshold {
            return (m >> 64) as u64;
        }
    }
}

pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = bounded(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}

/// First `k` positions of a seeded permutation of `0..population`.
pub fn sample_indices(rng: &mut impl RngCore, population: usize, k: usize) -> Vec<usize> {
    assert!(k <= population, "cannot sample {k} of {population}");
    let mut indices: Vec<usize> = (0..population).collect();
    // Partial Fisher-Yates: only the first k slots need settling.
    for i in 0..k {
        let j = i + bounded(rng, (population - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}
