//! Seeded randomness. Every stochastic choice draws from its own ChaCha
//! stream `(seed, index)`, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream indices reserved per consumer, so two consumers with the same seed
/// never share a stream.
pub mod purpose {
    pub const HOFER_STARTS: u64 = 1 << 32;
    pub const STRIP_NOISE: u64 = 2 << 32;
    pub const VERIFY: u64 = 3 << 32;
    pub const SIMULATE: u64 = 4 << 32;
}
