//! Seed derivation. All randomness in the crate flows from explicit seeds
//! through these helpers so results are stable across runs and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for item `stream` under `seed` (seed XOR hash of
/// the index).
pub fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    seeded(seed ^ mix64(stream))
}

/// Stable 64-bit digest of arbitrary bytes.
pub fn digest64(bytes: &[u8]) -> u64 {
    let hash = Sha256::digest(bytes);
    u64::from_le_bytes(hash[..8].try_into().expect("sha256 has 32 bytes"))
}

/// Sub-seed for a named stage or item.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(label.as_bytes());
    digest64(&bytes)
}
