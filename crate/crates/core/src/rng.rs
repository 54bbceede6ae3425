//! Seeded randomness.
//!
//! Every stochastic operation in the crate draws from a [`ChaCha8Rng`]
//! seeded through [`RandomSeed`]. Parallel tasks never share generator
//! state; each derives its own seed from `(seed, task_index)` with the
//! SplitMix64 finalizer, so results do not depend on scheduling.
//!
//! [`SplitMix64`] is also used directly where a byte-exact, easily
//! re-implemented stream is required (keyed pseudorandomness in the
//! verifier).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function.
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sebastiano Vigna's SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    /// Uniform integer in `0..bound` by the multiply-shift reduction
    /// `(x * bound) >> 64`.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform real in the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        u64_to_open01(self.next_u64())
    }
}

/// Maps a 64-bit word into (0, 1), never returning either endpoint.
///
/// Uses the top 52 bits: `((x >> 12) + 0.5) / 2^52`. With 53 bits the
/// largest value would round up to 1.
#[inline]
pub fn u64_to_open01(x: u64) -> f64 {
    ((x >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// A 64-bit seed. Equal seeds reproduce identical outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomSeed(pub u64);

impl RandomSeed {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    /// Seed for an independent child stream.
    pub fn derive(self, index: u64) -> RandomSeed {
        let mixed = splitmix64_mix(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
        RandomSeed(splitmix64_mix(self.0 ^ mixed))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn from_entropy() -> Self {
        RandomSeed(rand::random())
    }
}

impl From<u64> for RandomSeed {
    fn from(v: u64) -> Self {
        RandomSeed(v)
    }
}
