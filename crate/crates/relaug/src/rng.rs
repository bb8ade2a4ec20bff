//! Stable hashing and per-stage seed derivation.
//!
//! Everything random in the pipeline draws from a ChaCha8 stream seeded by
//! FNV-1a over (root seed, stage label). FNV-1a is implemented by hand
//! because `std`'s default hasher is not stable across releases and the
//! derived seeds are part of the reproducibility contract.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over a byte slice (64-bit variant).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Continue an FNV-1a stream with more bytes.
pub fn fnv1a64_continue(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic sub-seed for one named stage of a run.
pub fn derive_seed(root_seed: u64, label: &str) -> u64 {
    let h = fnv1a64_continue(FNV_OFFSET, &root_seed.to_le_bytes());
    fnv1a64_continue(h, label.as_bytes())
}

/// Seeded generator for one named stage.
pub fn seeded_rng(root_seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root_seed, label))
}
