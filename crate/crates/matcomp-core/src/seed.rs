//! Deterministic RNG plumbing.
//!
//! Every randomized routine in the crate takes an explicit generator; the
//! crate-wide generator family is ChaCha8 seeded from a 64-bit value, which
//! is stable across platforms and releases of this crate. Per-task streams
//! (one per trial, per draw, ...) are derived from a master seed and a list
//! of salts through a splitmix64-style avalanche mix, so concurrent tasks
//! never share a stream and schedules cannot affect results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 finalizer; full-avalanche bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a master seed and salt values
/// (for example `[d, n, trial]`). Deterministic and order-sensitive.
pub fn derive_seed(master: u64, salts: &[u64]) -> u64 {
    let mut h = mix(master);
    for &s in salts {
        h = mix(h ^ mix(s));
    }
    h
}
