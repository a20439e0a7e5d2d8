//! Deterministic RNG stream derivation.
//!
//! Every simulation task owns a private ChaCha8 stream whose 256-bit key is
//! derived from the base seed and the task coordinates with a splitmix64
//! chain. The exact mixing function, also documented in the README:
//!
//! ```text
//! state = splitmix64_next(base_seed)
//! for each word w in [tag, idx0, idx1, ...]:
//!     state = state XOR (w * 0xD1B54A32D192ED03)
//!     state = splitmix64_next(state)
//! key = next four splitmix64 outputs (little-endian bytes)
//! ```
//!
//! where `splitmix64_next(s)` advances `s += 0x9E3779B97F4A7C15` and returns
//! the finalised mix of the new state. Distinct task coordinates give
//! independent streams; the derivation is order-sensitive in the words.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain-separation tags for the derived streams.
pub mod tag {
    /// Input sequence generation for depth experiments: words (SEQUENCE, seed, sequence).
    pub const SEQUENCE: u64 = 0x01;
    /// Block weights for depth experiments: words (WEIGHTS, seed, layer).
    pub const WEIGHTS: u64 = 0x02;
    /// Single-layer phase grid sequences: words (PHASE_SEQ, beta_idx, rho_idx, seed).
    pub const PHASE_SEQ: u64 = 0x03;
    /// Single-layer phase grid weights: words (PHASE_WEIGHTS, beta_idx, rho_idx, seed).
    pub const PHASE_WEIGHTS: u64 = 0x04;
    /// Large-T streamed IPR tasks: words (IPR, beta_idx, seed, row).
    pub const IPR: u64 = 0x05;
    /// Deterministic pair subsampling in geometry measurements.
    pub const PAIR_SAMPLE: u64 = 0x06;
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;
const ABSORB: u64 = 0xD1B54A32D192ED03;

/// splitmix64: advance the state by the golden-ratio increment and finalise.
pub fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derive the ChaCha8 stream for the task identified by `words`.
pub fn derive_stream(base_seed: u64, words: &[u64]) -> ChaCha8Rng {
    let mut state = base_seed;
    let mut _mixed = splitmix64_next(&mut state);
    for &w in words {
        state ^= w.wrapping_mul(ABSORB);
        _mixed = splitmix64_next(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64_next(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
