//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] whose
//! 256-bit key is derived from a user seed and a list of tags (replicate
//! index, role, ...) through a SplitMix64 cascade. Two streams with
//! different tag lists are statistically independent, and a stream never
//! depends on thread scheduling, so results are reproducible across runs
//! and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Role tags used when deriving substreams.
pub mod role {
    pub const DATASET: u64 = 1;
    pub const BOOTSTRAP: u64 = 2;
    pub const LOCATIONS: u64 = 3;
    pub const GROUND_TRUTH: u64 = 4;
    pub const MONTE_CARLO: u64 = 5;
    pub const TRAINING: u64 = 6;
    pub const VALIDATION: u64 = 7;
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a list of tags into a single 64-bit value.
pub fn mix(seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(seed ^ 0x6A09_E667_F3BC_C908);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag.wrapping_add(0x3C6E_F372_FE94_F82B)));
    }
    state
}

/// Returns the substream identified by `(seed, tags)`.
pub fn substream(seed: u64, tags: &[u64]) -> Stream {
    let mut key = [0u8; 32];
    let mut state = mix(seed, tags);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Feeds `f64` values into an order-sensitive 64-bit fingerprint.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Fingerprint(u64);

impl Fingerprint {
    pub fn new(seed: u64) -> Self {
        Fingerprint(splitmix64(seed))
    }

    pub fn push_u64(&mut self, v: u64) {
        self.0 = splitmix64(self.0 ^ v.rotate_left(17)).wrapping_add(v);
    }

    pub fn push_f64(&mut self, v: f64) {
        // -0.0 and 0.0 describe the same distribution.
        let v = if v == 0.0 { 0.0 } else { v };
        self.push_u64(v.to_bits());
    }

    pub fn finish(self) -> u64 {
        splitmix64(self.0)
    }
}
