//! Seeded random streams. Every random decision in a run (wiring, weight
//! init, shuffling, synthetic data) draws from its own ChaCha stream so that
//! changing one consumer never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Wiring = 1,
    Init = 2,
    Shuffle = 3,
    Synthetic = 4,
    GradCheck = 5,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}
