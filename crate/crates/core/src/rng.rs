//! Seed derivation for independent, reproducible random streams.
//!
//! Every consumer of randomness asks for a stream keyed by a master seed and a
//! path such as `(purpose, client, round)`. Streams never share state, so the
//! order in which parallel clients run cannot change any draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. The discriminants are part of the reproducibility
/// contract; never renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Splits = 1,
    Partition = 2,
    OverlapSample = 3,
    GnnInit = 4,
    GfnInit = 5,
    Rollout = 6,
    BatchOrder = 7,
    Evaluation = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from a seed and an arbitrary path of integers.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Independent stream for `(seed, purpose, path...)`.
pub fn stream(seed: u64, purpose: Purpose, path: &[u64]) -> StreamRng {
    let mut key = derive_key(seed, &[purpose as u64]);
    key = derive_key(key, path);
    ChaCha8Rng::seed_from_u64(key)
}

/// Uniform index in `0..n` drawn through `u64` so results do not depend on
/// the platform's pointer width.
pub fn index_below<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.random_range(0..n as u64) as usize
}

/// Fisher–Yates shuffle with platform-independent draws.
pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index_below(rng, i + 1);
        items.swap(i, j);
    }
}

/// `k` distinct elements of `0..n`, uniformly, in draw order
/// (partial Fisher–Yates).
pub fn sample_without_replacement<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + index_below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}
