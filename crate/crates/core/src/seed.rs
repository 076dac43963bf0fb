//! Seed derivation for replicas and repeats.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent seed for item `index` of a run seeded with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}
