//! Seed derivation.
//!
//! Every random stream in a run is derived from one master seed through a
//! splitmix64 counter scheme, so replicas, epochs and layers get independent
//! streams that do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used everywhere in the crate. ChaCha8 output is stable across
/// platforms and crate versions, which the determinism tests rely on.
pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of child stream `index` of `parent`.
pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(parent.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Derive a seed along a path of indices, e.g. `[epoch, layer]`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, &i| derive(s, i))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Well-known stream tags, so that unrelated consumers of the same parent
/// seed never collide.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const TOPOLOGY: u64 = 3;
    pub const PERTURB: u64 = 4;
    pub const REPLICA: u64 = 5;
}
