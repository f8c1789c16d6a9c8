//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a seed derived
//! from `(master seed, purpose, index)`. ChaCha is counter based, so a task's stream
//! depends only on its own key and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

/// Derives a child seed for the `index`-th task of a given `purpose`.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a(purpose));
    splitmix64(h ^ splitmix64(index.wrapping_add(GOLDEN)))
}

/// Generator for the `index`-th task of `purpose` under `master`.
pub fn rng_for(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, index))
}
