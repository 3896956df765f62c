//! Deterministic per-realization random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master seed plus the rule mapping a realization index to its stream.
///
/// Realization `i` draws from the ChaCha8 stream `i` keyed by the master
/// seed, so its noise never depends on scheduling or thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPlan {
    seed: u64,
}

impl RngPlan {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A plan for an auxiliary purpose, derived from the master seed.
    pub fn derive(&self, salt: u64) -> Self {
        Self { seed: self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) }
    }
}
