//! Deterministic RNG stream derivation.
//!
//! Monte Carlo trials must be reproducible and order-independent: every
//! (seed, axis, trial) triple maps to its own counter-derived stream, so
//! axis points and trials can run in any order or in parallel without
//! changing the drawn values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates consecutive counter values.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent stream from a seed and up to three indices.
pub fn derive_rng(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut state = mix64(seed ^ 0x6c62_272e_07bb_0142);
    for &l in labels {
        state = mix64(state ^ mix64(l.wrapping_add(0x1f83_d9ab_fb41_bd6b)));
    }
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        state = mix64(state.wrapping_add(i as u64 + 1));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
