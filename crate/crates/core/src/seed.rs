//! Counter-based seed splitting.
//!
//! A child seed depends only on the root seed and its path of ids, so adding
//! cells or trials never shifts the stream of an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `root` along `path`.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(root), |acc, &id| splitmix(acc ^ splitmix(id.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng_from(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

/// Stream labels used in seed paths.
pub mod stream {
    pub const DESIGN: u64 = 1;
    pub const SGD_PATH: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const CELL: u64 = 4;
}
